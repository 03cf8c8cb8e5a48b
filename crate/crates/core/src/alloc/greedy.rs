// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use super::{AllocError, AllocationInstance};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationResult {
    /// Units provider `i` gives to consumer `i`.
    pub own: Vec<i64>,
    /// Units provider `i` gives to consumer `(i + 1) mod N`.
    pub next: Vec<i64>,
    pub total: i64,
}

impl AllocationResult {
    /// Units taken from provider `i`.
    pub fn salloc(&self, i: usize) -> i64 {
        self.own[i] + self.next[i]
    }

    /// Units received by consumer `i`.
    pub fn palloc(&self, i: usize) -> i64 {
        let n = self.own.len();
        self.own[i] + self.next[(i + n - 1) % n]
    }

    /// Both constraint families hold and every value is non-negative.
    pub fn is_feasible(&self, inst: &AllocationInstance) -> bool {
        let n = inst.n();
        self.own.len() == n
            && self.next.len() == n
            && self.own.iter().chain(&self.next).all(|&v| v >= 0)
            && (0..n).all(|i| self.salloc(i) <= inst.s()[i] && self.palloc(i) <= inst.p()[i])
            && self.total == self.own.iter().sum::<i64>() + self.next.iter().sum::<i64>()
    }
}

/// Greedy allocation with `own[0] = x`: providers in index order first fill
/// their own consumer (except provider 0), then hand what is left to the
/// next consumer.
pub fn greedy_algo(inst: &AllocationInstance, x: i64) -> Result<AllocationResult, AllocError> {
    inst.check_x(x)?;
    Ok(greedy_unchecked(inst, x))
}

pub(crate) fn greedy_unchecked(inst: &AllocationInstance, x: i64) -> AllocationResult {
    let (s, p) = (inst.s(), inst.p());
    let n = inst.n();
    let mut salloc = vec![0; n];
    let mut palloc = vec![0; n];
    let mut own = vec![0; n];
    let mut next = vec![0; n];
    salloc[0] = x;
    palloc[0] = x;
    own[0] = x;
    for i in 0..n {
        if i > 0 {
            let q = (s[i] - salloc[i]).min(p[i] - palloc[i]);
            salloc[i] += q;
            palloc[i] += q;
            own[i] = q;
        }
        let j = (i + 1) % n;
        let q = (s[i] - salloc[i]).min(p[j] - palloc[j]);
        salloc[i] += q;
        palloc[j] += q;
        next[i] = q;
    }
    let total = salloc.iter().sum();
    AllocationResult { own, next, total }
}

/// `rsum(x)` for every `x` in `[0, XMAX]`, one greedy run each.
pub fn rsum_naive(inst: &AllocationInstance) -> Vec<i64> {
    (0..=inst.xmax())
        .map(|x| greedy_unchecked(inst, x).total)
        .collect()
}
