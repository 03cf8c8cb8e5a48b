// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use super::greedy::greedy_unchecked;
use super::AllocationInstance;

/// `rsum` rebuilt from three or four greedy evaluations: `y1 + x` on
/// `[0, rise_end]`, `plateau_value` on `[rise_end + 1, plateau_end]`, then
/// `y2 + (xmax - x)` up to `xmax`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RsumProfile {
    pub xmax: i64,
    /// `rsum(0)`.
    pub y1: i64,
    /// `rsum(xmax)`.
    pub y2: i64,
    pub x1: i64,
    pub x2: i64,
    pub yx1: i64,
    pub yx2: i64,
    pub d1: i64,
    pub d2: i64,
    pub rise_end: i64,
    pub plateau_end: i64,
    pub plateau_value: i64,
}

impl RsumProfile {
    pub fn eval(&self, x: i64) -> i64 {
        assert!((0..=self.xmax).contains(&x));
        if x <= self.rise_end {
            self.y1 + x
        } else if x <= self.plateau_end {
            self.plateau_value
        } else {
            self.y2 + (self.xmax - x)
        }
    }

    pub fn expand(&self) -> Vec<i64> {
        (0..=self.xmax).map(|x| self.eval(x)).collect()
    }
}

pub fn rsum_closed_form(inst: &AllocationInstance) -> RsumProfile {
    let xmax = inst.xmax();
    let algo = |x| greedy_unchecked(inst, x).total;
    let y1 = algo(0);
    let y2 = algo(xmax);
    let m = y2 - y1 + xmax;
    let x1 = m.div_euclid(2);
    let yx1 = algo(x1);
    let (x2, yx2) = if m.rem_euclid(2) == 1 {
        (x1 + 1, algo(x1 + 1))
    } else {
        (x1, yx1)
    };
    let d1 = y1 + x1 - yx1;
    let d2 = y2 + (xmax - x2) - yx2;
    RsumProfile {
        xmax,
        y1,
        y2,
        x1,
        x2,
        yx1,
        yx2,
        d1,
        d2,
        rise_end: x1 - d1,
        plateau_end: x2 + d2,
        plateau_value: yx1,
    }
}

/// Smallest `x` reaching the maximum of `rsum`, and that maximum.
pub fn rsum_max(inst: &AllocationInstance) -> (i64, i64) {
    let p = rsum_closed_form(inst);
    (p.rise_end.max(0), p.plateau_value)
}
