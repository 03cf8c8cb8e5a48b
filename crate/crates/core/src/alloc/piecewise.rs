// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Integer functions on `[0, xmax]` whose unit steps are -1, 0 or +1, and
//! the per-provider allocation functions built from them.

use super::{AllocError, AllocationInstance};

/// `value0` at `x = 0`, then runs of constant slope. A run starting at
/// `start` applies to every step `x -> x + 1` up to the next run's start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseUnitFn {
    xmax: i64,
    value0: i64,
    runs: Vec<(i64, i8)>,
}

impl PiecewiseUnitFn {
    pub fn constant(xmax: i64, c: i64) -> Self {
        Self::linear(xmax, c, 0)
    }

    pub fn linear(xmax: i64, value0: i64, slope: i8) -> Self {
        assert!(xmax >= 0 && (-1..=1).contains(&slope));
        let runs = if xmax > 0 { vec![(0, slope)] } else { Vec::new() };
        let mut f = Self { xmax, value0, runs };
        f.normalize();
        f
    }

    /// Builds the function through integer knots; between consecutive
    /// knots the function must be linear with a unit slope.
    fn from_knots(xmax: i64, knots: &[(i64, i64)]) -> Self {
        debug_assert!(knots.first().map(|k| k.0) == Some(0));
        let mut runs = Vec::new();
        for w in knots.windows(2) {
            let ((x0, v0), (x1, v1)) = (w[0], w[1]);
            let dx = x1 - x0;
            if dx == 0 {
                continue;
            }
            let dv = v1 - v0;
            let slope = if dv == dx {
                1
            } else if dv == -dx {
                -1
            } else {
                assert_eq!(dv, 0, "step ({x0}, {v0}) -> ({x1}, {v1}) is not a unit slope");
                0
            };
            runs.push((x0, slope));
        }
        let mut f = Self {
            xmax,
            value0: knots[0].1,
            runs,
        };
        f.normalize();
        f
    }

    fn normalize(&mut self) {
        self.runs.dedup_by(|later, earlier| later.1 == earlier.1);
        if self.runs.len() == 1 && self.runs[0].1 == 0 {
            self.runs.clear();
        }
    }

    pub fn xmax(&self) -> i64 {
        self.xmax
    }

    pub fn value0(&self) -> i64 {
        self.value0
    }

    /// `(start, slope)` for each run, starting at 0 unless the function is
    /// constant (no runs at all).
    pub fn runs(&self) -> &[(i64, i8)] {
        &self.runs
    }

    /// Slopes in order, without repeats.
    pub fn pattern(&self) -> Vec<i8> {
        self.runs.iter().map(|r| r.1).collect()
    }

    fn run_end(&self, k: usize) -> i64 {
        self.runs.get(k + 1).map_or(self.xmax, |r| r.0)
    }

    /// Breakpoints including both ends of the domain.
    pub fn knots(&self) -> Vec<i64> {
        let mut xs = vec![0];
        xs.extend(self.runs.iter().map(|r| r.0));
        xs.push(self.xmax);
        xs.dedup();
        xs
    }

    pub fn eval(&self, x: i64) -> i64 {
        assert!((0..=self.xmax).contains(&x), "x = {x} outside [0, {}]", self.xmax);
        let mut v = self.value0;
        for (k, &(start, slope)) in self.runs.iter().enumerate() {
            if x <= start {
                break;
            }
            v += slope as i64 * (x.min(self.run_end(k)) - start);
        }
        v
    }

    pub fn values(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.xmax as usize + 1);
        let mut v = self.value0;
        out.push(v);
        for (k, &(start, slope)) in self.runs.iter().enumerate() {
            for _ in start..self.run_end(k) {
                v += slope as i64;
                out.push(v);
            }
        }
        if self.runs.is_empty() {
            out.resize(self.xmax as usize + 1, v);
        }
        out
    }

    /// `c - self`.
    pub fn subtracted_from(&self, c: i64) -> Self {
        Self {
            xmax: self.xmax,
            value0: c - self.value0,
            runs: self.runs.iter().map(|&(s, m)| (s, -m)).collect(),
        }
    }

    /// Pointwise minimum on the integer grid.
    pub fn min(&self, other: &Self) -> Self {
        assert_eq!(self.xmax, other.xmax);
        let mut xs = self.knots();
        xs.extend(other.knots());
        xs.sort_unstable();
        xs.dedup();
        // Where the two cross inside an interval, the minimum bends; add
        // the integers on both sides of the crossing.
        let mut extra = Vec::new();
        for w in xs.windows(2) {
            let (u, v) = (w[0], w[1]);
            let du = self.eval(u) - other.eval(u);
            let dv = self.eval(v) - other.eval(v);
            if (du < 0 && dv > 0) || (du > 0 && dv < 0) {
                let num = -du * (v - u);
                let den = dv - du;
                let lo = u + num.div_euclid(den);
                extra.push(lo);
                extra.push((lo + 1).min(v));
            }
        }
        xs.extend(extra);
        xs.sort_unstable();
        xs.dedup();
        let knots: Vec<(i64, i64)> = xs
            .into_iter()
            .map(|x| (x, self.eval(x).min(other.eval(x))))
            .collect();
        Self::from_knots(self.xmax, &knots)
    }

    pub fn min_const(&self, c: i64) -> Self {
        self.min(&Self::constant(self.xmax, c))
    }

    /// True when the slope pattern is an in-order selection from `allowed`.
    pub fn matches_pattern(&self, allowed: &[i8]) -> bool {
        let mut it = allowed.iter();
        self.pattern().iter().all(|s| it.any(|a| a == s))
    }

    /// Bounds and values of the (at most one) sloped run with the given sign:
    /// `(start, end, value at start, value at end)`. A function without such
    /// a run reports an empty run at `xmax`.
    fn sloped_span(&self, sign: i8) -> (i64, i64, i64, i64) {
        match self.runs.iter().position(|r| r.1 == sign) {
            Some(k) => {
                let (start, end) = (self.runs[k].0, self.run_end(k));
                (start, end, self.eval(start), self.eval(end))
            }
            None => {
                let v = self.eval(self.xmax);
                (self.xmax, self.xmax, v, v)
            }
        }
    }

    /// Shape parameters of an increasing (provider-side) function.
    pub fn f_shape(&self) -> FShape {
        let (a, b, v1, v2) = self.sloped_span(1);
        FShape { a, b, v1, v2 }
    }

    /// Shape parameters of a decreasing (consumer-side) function.
    pub fn g_shape(&self) -> GShape {
        let (c, d, v1, v2) = self.sloped_span(-1);
        let k = self.runs.iter().position(|r| r.1 == -1);
        let tail = k.and_then(|k| self.runs[k + 1..].iter().find(|r| r.1 == -1).map(|r| r.0));
        GShape { c, d, v1, v2, tail }
    }
}

/// `f = v1` on `[0, a]`, rises with slope 1 on `[a, b]`, `= v2` on `[b, xmax]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FShape {
    pub a: i64,
    pub b: i64,
    pub v1: i64,
    pub v2: i64,
}

/// `g = v1` on `[0, c]`, falls with slope 1 on `[c, d]`, then `= v2`. Only
/// the consumer-0 function may fall again from `tail` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GShape {
    pub c: i64,
    pub d: i64,
    pub v1: i64,
    pub v2: i64,
    pub tail: Option<i64>,
}

/// `f[i]` is what provider `i` gives consumer `i`, `g[i]` what consumer `i`
/// receives from provider `(i - 1) mod N`, both as functions of `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FgSet {
    pub f: Vec<PiecewiseUnitFn>,
    pub g: Vec<PiecewiseUnitFn>,
}

impl FgSet {
    pub fn total_at(&self, x: i64) -> i64 {
        self.f.iter().chain(&self.g).map(|h| h.eval(x)).sum()
    }
}

const F_PATTERN: [i8; 3] = [0, 1, 0];
const G_PATTERN: [i8; 3] = [0, -1, 0];
const G0_PATTERN: [i8; 4] = [0, -1, 0, -1];

/// Builds `g(1)` from `f(0)`, `f(1)` from `g(1)`, and so on around the ring,
/// ending with `g(0)`. Every function is checked against its expected slope
/// pattern.
pub fn compute_fg(inst: &AllocationInstance) -> Result<FgSet, AllocError> {
    let (s, p) = (inst.s(), inst.p());
    let n = inst.n();
    let xmax = inst.xmax();
    let mut f = Vec::with_capacity(n);
    let mut g = vec![PiecewiseUnitFn::constant(xmax, 0); n];
    f.push(PiecewiseUnitFn::linear(xmax, 0, 1));
    for i in 1..n {
        g[i] = f[i - 1].subtracted_from(s[i - 1]).min_const(p[i]);
        f.push(g[i].subtracted_from(p[i]).min_const(s[i]));
    }
    let room0 = PiecewiseUnitFn::linear(xmax, p[0], -1);
    g[0] = f[n - 1].subtracted_from(s[n - 1]).min(&room0);

    let check = |h: &PiecewiseUnitFn, allowed: &[i8], name: String| {
        if h.matches_pattern(allowed) {
            Ok(())
        } else {
            Err(AllocError::Shape {
                function: name,
                pattern: h.pattern(),
            })
        }
    };
    for (i, h) in f.iter().enumerate() {
        check(h, &F_PATTERN, format!("f({i})"))?;
    }
    for (i, h) in g.iter().enumerate() {
        let allowed: &[i8] = if i == 0 { &G0_PATTERN } else { &G_PATTERN };
        check(h, allowed, format!("g({i})"))?;
    }
    Ok(FgSet { f, g })
}
