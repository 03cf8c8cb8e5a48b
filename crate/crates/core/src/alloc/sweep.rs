// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use super::{compute_fg, AllocError, AllocationInstance};

/// `rsum` over `[0, XMAX]` by sweeping the slope changes of every `f` and
/// `g` in ascending `x`.
///
/// `sum` holds `rsum` at the previous event coordinate and `dif` the
/// current total slope. Events at the same coordinate are applied together;
/// the gap between equal coordinates is empty, so their order does not
/// matter.
pub fn rsum_sweep(inst: &AllocationInstance) -> Result<Vec<i64>, AllocError> {
    let fg = compute_fg(inst)?;
    let xmax = inst.xmax();
    let funcs: Vec<_> = fg.f.iter().chain(&fg.g).collect();

    // (x, function index, new slope)
    let mut events: Vec<(i64, usize, i64)> = funcs
        .iter()
        .enumerate()
        .flat_map(|(k, h)| h.runs().iter().map(move |&(x, s)| (x, k, s as i64)))
        .collect();
    events.push((xmax, usize::MAX, 0));
    events.sort_unstable_by_key(|e| e.0);

    let mut slopes = vec![0i64; funcs.len()];
    let mut sum: i64 = funcs.iter().map(|h| h.value0()).sum();
    let mut dif = 0i64;
    let mut prev = 0i64;
    let mut out = Vec::with_capacity(xmax as usize + 1);
    out.push(sum);
    for (e, k, slope) in events {
        for x in prev + 1..=e {
            out.push(sum + dif * (x - prev));
        }
        sum += dif * (e - prev);
        prev = e;
        if k != usize::MAX {
            dif += slope - slopes[k];
            slopes[k] = slope;
        }
    }
    debug_assert_eq!(out.len(), xmax as usize + 1);
    Ok(out)
}
