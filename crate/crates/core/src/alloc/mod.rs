// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Ring-constrained resource allocation.
//!
//! Provider `i` offers `S(i)` units and may serve only consumers `i` and
//! `(i + 1) mod N`; consumer `i` takes at most `P(i)` units. With the
//! provider-0-to-consumer-0 allocation fixed at `x`, `rsum(x)` is the best
//! achievable total. It rises with slope 1, stays flat, then falls with
//! slope 1, which lets the whole table be rebuilt from a handful of greedy
//! evaluations.

mod closed;
mod greedy;
mod oracle;
mod piecewise;
mod sweep;
pub mod verify;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use closed::{rsum_closed_form, rsum_max, RsumProfile};
pub use greedy::{greedy_algo, rsum_naive, AllocationResult};
pub use oracle::{brute_force_oracle, ORACLE_LIMIT};
pub use piecewise::{compute_fg, FShape, FgSet, GShape, PiecewiseUnitFn};
pub use sweep::rsum_sweep;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("a ring needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("S has {s} entries but P has {p}")]
    LengthMismatch { s: usize, p: usize },
    #[error("capacities must be non-negative ({which}[{index}] = {value})")]
    Negative {
        which: char,
        index: usize,
        value: i64,
    },
    #[error("x = {x} is outside [0, {xmax}]")]
    XOutOfRange { x: i64, xmax: i64 },
    #[error("instance needs about {combinations:.3e} combinations, above the enumeration limit")]
    TooLarge { combinations: f64 },
    #[error("{function} does not have the expected slope pattern: {pattern:?}")]
    Shape { function: String, pattern: Vec<i8> },
    #[error("cannot parse instance: {0}")]
    Parse(String),
}

/// Provider capacities `s` and consumer capacities `p`, in resource units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationInstance {
    s: Vec<i64>,
    p: Vec<i64>,
}

impl AllocationInstance {
    pub fn new(s: Vec<i64>, p: Vec<i64>) -> Result<Self, AllocError> {
        if s.len() != p.len() {
            return Err(AllocError::LengthMismatch {
                s: s.len(),
                p: p.len(),
            });
        }
        if s.len() < 2 {
            return Err(AllocError::TooFewNodes(s.len()));
        }
        for (which, v) in [('S', &s), ('P', &p)] {
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, &x)| x < 0) {
                return Err(AllocError::Negative {
                    which,
                    index,
                    value,
                });
            }
        }
        Ok(Self { s, p })
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn s(&self) -> &[i64] {
        &self.s
    }

    pub fn p(&self) -> &[i64] {
        &self.p
    }

    pub fn xmax(&self) -> i64 {
        self.s[0].min(self.p[0])
    }

    pub(crate) fn check_x(&self, x: i64) -> Result<(), AllocError> {
        if (0..=self.xmax()).contains(&x) {
            Ok(())
        } else {
            Err(AllocError::XOutOfRange {
                x,
                xmax: self.xmax(),
            })
        }
    }
}

/// Two lines, `S: a b c ...` and `P: a b c ...`, in either order. Blank
/// lines and `#` comments are ignored.
impl FromStr for AllocationInstance {
    type Err = AllocError;

    fn from_str(text: &str) -> Result<Self, AllocError> {
        let mut s = None;
        let mut p = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| AllocError::Parse(format!("line {}: expected `S:` or `P:`", lineno + 1)))?;
            let values = parse_list(rest)
                .map_err(|e| AllocError::Parse(format!("line {}: {e}", lineno + 1)))?;
            let slot = match key.trim() {
                "S" | "s" => &mut s,
                "P" | "p" => &mut p,
                other => {
                    return Err(AllocError::Parse(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            };
            if slot.replace(values).is_some() {
                return Err(AllocError::Parse(format!("line {}: `{}` given twice", lineno + 1, key.trim())));
            }
        }
        match (s, p) {
            (Some(s), Some(p)) => Self::new(s, p),
            _ => Err(AllocError::Parse("need both an `S:` and a `P:` line".into())),
        }
    }
}

/// Parses integers separated by whitespace and/or commas, optionally in
/// square brackets.
pub fn parse_list(text: &str) -> Result<Vec<i64>, String> {
    text.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<i64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

impl fmt::Display for AllocationInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
        writeln!(f, "S: {}", join(&self.s))?;
        writeln!(f, "P: {}", join(&self.p))
    }
}

#[cfg(test)]
mod tests;
