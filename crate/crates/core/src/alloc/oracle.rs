// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Exhaustive search over integer allocations, for cross-checking.

use super::{AllocError, AllocationInstance};

/// Largest `prod (S(i) + 1)^2` the oracle accepts.
pub const ORACLE_LIMIT: f64 = 1e7;

/// Maximum total over every feasible allocation with `own[0] = x`.
///
/// Enumerates `own[i]` and `next[i]` provider by provider. Branches that
/// already violate a constraint are cut, so the work is proportional to
/// the number of feasible prefixes rather than to the full grid.
pub fn brute_force_oracle(inst: &AllocationInstance, x: i64) -> Result<i64, AllocError> {
    inst.check_x(x)?;
    let combinations: f64 = inst
        .s()
        .iter()
        .map(|&s| ((s + 1) as f64).powi(2))
        .product();
    if combinations > ORACLE_LIMIT {
        return Err(AllocError::TooLarge { combinations });
    }
    let mut best = 0;
    search(inst, 0, x, 0, x, &mut best);
    Ok(best)
}

/// Provider `i` chooses `own` (fixed to `x` for provider 0) and `next`.
/// `into_i` is what provider `i - 1` already gave consumer `i`.
fn search(inst: &AllocationInstance, i: usize, x: i64, into_i: i64, total: i64, best: &mut i64) {
    let (s, p) = (inst.s(), inst.p());
    let n = inst.n();
    let own_range = if i == 0 {
        x..=x
    } else {
        0..=s[i].min(p[i] - into_i)
    };
    for own in own_range {
        let base = if i == 0 { total } else { total + own };
        let j = (i + 1) % n;
        // Consumer 0 already holds x; other consumers are still empty.
        let room = if j == 0 { p[0] - x } else { p[j] };
        for next in 0..=(s[i] - own).min(room) {
            if j == 0 {
                *best = (*best).max(base + next);
            } else {
                search(inst, j, x, next, base + next, best);
            }
        }
    }
}
