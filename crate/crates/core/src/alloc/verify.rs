// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Cross-checking sweeps over many instances.
//!
//! Each instance is generated from its own index, so sequential and
//! parallel runs see exactly the same instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    brute_force_oracle, compute_fg, greedy_algo, rsum_closed_form, rsum_naive, rsum_sweep,
    AllocationInstance,
};
use crate::exec::{map_indexed, Execution};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleMismatch {
    pub instance: AllocationInstance,
    pub x: i64,
    pub greedy: i64,
    pub oracle: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub instances: usize,
    /// `(instance, x)` pairs compared.
    pub checks: usize,
    pub mismatches: Vec<OracleMismatch>,
    /// Greedy results that broke a constraint.
    pub infeasible: Vec<(AllocationInstance, i64)>,
}

impl OracleReport {
    fn merge(mut self, other: OracleReport) -> Self {
        self.instances += other.instances;
        self.checks += other.checks;
        self.mismatches.extend(other.mismatches);
        self.infeasible.extend(other.infeasible);
        self
    }

    pub fn clean(&self) -> bool {
        self.mismatches.is_empty() && self.infeasible.is_empty()
    }
}

fn check_oracle(inst: AllocationInstance) -> OracleReport {
    let mut rep = OracleReport {
        instances: 1,
        ..Default::default()
    };
    for x in 0..=inst.xmax() {
        let g = greedy_algo(&inst, x).expect("x in range");
        let o = brute_force_oracle(&inst, x).expect("small instance");
        rep.checks += 1;
        if !g.is_feasible(&inst) {
            rep.infeasible.push((inst.clone(), x));
        }
        if g.total != o {
            rep.mismatches.push(OracleMismatch {
                instance: inst.clone(),
                x,
                greedy: g.total,
                oracle: o,
            });
        }
    }
    rep
}

/// Instance number `index` of all `(max_entry + 1)^(2n)` instances, read as
/// base-`(max_entry + 1)` digits.
fn nth_instance(n: usize, max_entry: i64, mut index: u64) -> AllocationInstance {
    let base = (max_entry + 1) as u64;
    let mut digits = Vec::with_capacity(2 * n);
    for _ in 0..2 * n {
        digits.push((index % base) as i64);
        index /= base;
    }
    let p = digits.split_off(n);
    AllocationInstance::new(digits, p).expect("n >= 2")
}

fn instance_count(n: usize, max_entry: i64) -> u64 {
    ((max_entry + 1) as u64).pow(2 * n as u32)
}

/// Greedy against the oracle for every instance of size `n` with entries
/// in `0..=max_entry`, at every `x`.
pub fn exhaustive_oracle_sweep(n: usize, max_entry: i64, mode: Execution) -> OracleReport {
    let count = instance_count(n, max_entry) as usize;
    map_indexed(count, mode, |i| check_oracle(nth_instance(n, max_entry, i as u64)))
        .into_iter()
        .fold(OracleReport::default(), OracleReport::merge)
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Like [`exhaustive_oracle_sweep`] on `samples` uniformly drawn instances.
pub fn sampled_oracle_sweep(
    n: usize,
    max_entry: i64,
    samples: usize,
    seed: u64,
    mode: Execution,
) -> OracleReport {
    let count = instance_count(n, max_entry);
    map_indexed(samples, mode, |i| {
        let idx = rng_for(seed, i).random_range(0..count);
        check_oracle(nth_instance(n, max_entry, idx))
    })
    .into_iter()
    .fold(OracleReport::default(), OracleReport::merge)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Disagreement {
    Sweep { naive: Vec<i64>, sweep: Vec<i64> },
    ClosedForm { naive: Vec<i64>, closed: Vec<i64> },
    /// Differences outside `{-1, 0, 1}` or increasing somewhere.
    Shape { naive: Vec<i64> },
    /// `f`/`g` disagree with direct evaluation or with their slope pattern.
    Fg(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgreementReport {
    pub instances: usize,
    pub failures: Vec<(AllocationInstance, Disagreement)>,
}

pub fn random_instance(rng: &mut impl Rng, max_n: usize, max_entry: i64) -> AllocationInstance {
    let n = rng.random_range(2..=max_n);
    let s = (0..n).map(|_| rng.random_range(0..=max_entry)).collect();
    let p = (0..n).map(|_| rng.random_range(0..=max_entry)).collect();
    AllocationInstance::new(s, p).expect("n >= 2")
}

/// True when consecutive differences are in `{-1, 0, 1}` and never increase.
pub fn has_unimodal_shape(values: &[i64]) -> bool {
    let diffs: Vec<i64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.iter().all(|d| (-1..=1).contains(d)) && diffs.windows(2).all(|w| w[1] <= w[0])
}

/// Checks one instance: naive, sweep and closed form agree, the table has
/// the rise-plateau-fall shape, and `f`/`g` match the recurrences pointwise.
pub fn check_agreement(inst: &AllocationInstance) -> Option<Disagreement> {
    let naive = rsum_naive(inst);
    let sweep = match rsum_sweep(inst) {
        Ok(s) => s,
        Err(e) => return Some(Disagreement::Fg(e.to_string())),
    };
    if sweep != naive {
        return Some(Disagreement::Sweep { naive, sweep });
    }
    let closed = rsum_closed_form(inst).expand();
    if closed != naive {
        return Some(Disagreement::ClosedForm { naive, closed });
    }
    if !has_unimodal_shape(&naive) {
        return Some(Disagreement::Shape { naive });
    }
    let fg = compute_fg(inst).expect("checked by the sweep");
    let (s, p) = (inst.s(), inst.p());
    let n = inst.n();
    for x in 0..=inst.xmax() {
        let mut f_prev = x;
        if fg.f[0].eval(x) != x {
            return Some(Disagreement::Fg(format!("f(0, {x})")));
        }
        for i in 1..n {
            let g = (s[i - 1] - f_prev).min(p[i]);
            let f = (p[i] - g).min(s[i]);
            if fg.g[i].eval(x) != g || fg.f[i].eval(x) != f {
                return Some(Disagreement::Fg(format!("f/g({i}, {x})")));
            }
            f_prev = f;
        }
        let g0 = (s[n - 1] - f_prev).min(p[0] - x);
        if fg.g[0].eval(x) != g0 {
            return Some(Disagreement::Fg(format!("g(0, {x})")));
        }
    }
    None
}

/// [`check_agreement`] on `count` random instances.
pub fn agreement_sweep(
    count: usize,
    max_n: usize,
    max_entry: i64,
    seed: u64,
    mode: Execution,
) -> AgreementReport {
    let failures = map_indexed(count, mode, |i| {
        let inst = random_instance(&mut rng_for(seed, i), max_n, max_entry);
        check_agreement(&inst).map(|d| (inst, d))
    })
    .into_iter()
    .flatten()
    .collect();
    AgreementReport {
        instances: count,
        failures,
    }
}
