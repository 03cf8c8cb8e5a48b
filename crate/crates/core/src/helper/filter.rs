// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Outlier filtering for per-helper throughput samples.
//!
//! The pipeline is a median band filter followed by iterated trimming
//! around the mean, and finally an arithmetic mean of the survivors.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("median of an empty sample set")]
pub struct EmptySamples;

/// Median of `values`; the mean of the two middle elements for even counts.
pub fn median(values: &[f64]) -> Result<f64, EmptySamples> {
    if values.is_empty() {
        return Err(EmptySamples);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        Ok(sorted[mid])
    } else {
        Ok((sorted[mid - 1] + sorted[mid]) / 2.0)
    }
}

/// Arithmetic mean, accumulated as offsets from the first value so that a
/// constant input comes back exactly.
pub fn mean(values: &[f64]) -> Option<f64> {
    let &first = values.first()?;
    let offset: f64 = values.iter().map(|v| v - first).sum();
    Some(first + offset / values.len() as f64)
}

/// Population standard deviation around `mean`.
fn population_sd(values: &[f64], mean: f64) -> f64 {
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

/// Drops values strictly below `p1 * median` or strictly above
/// `p2 * median`. The median element itself always survives.
pub fn median_band_filter(samples: &[f64], p1: f64, p2: f64) -> Vec<f64> {
    let Ok(med) = median(samples) else {
        return Vec::new();
    };
    let (lo, hi) = (p1 * med, p2 * med);
    samples
        .iter()
        .copied()
        .filter(|&v| v >= lo && v <= hi)
        .collect()
}

/// Repeatedly removes values outside `[mean - q*sd, mean + q*sd]` while more
/// than `k` values remain, stopping once a round removes nothing.
///
/// A round that would remove every value is not applied.
pub fn iterated_trim(samples: &[f64], q: f64, k: usize) -> Vec<f64> {
    let mut kept = samples.to_vec();
    while kept.len() > k {
        let m = kept.iter().sum::<f64>() / kept.len() as f64;
        let sd = population_sd(&kept, m);
        // A few ulps of slack so that round-off in the mean never evicts a
        // value sitting exactly on the band edge (e.g. zero variance).
        let slack = 4.0 * f64::EPSILON * m.abs().max(sd);
        let half = q * sd + slack;
        let next: Vec<f64> = kept
            .iter()
            .copied()
            .filter(|&v| (v - m).abs() <= half)
            .collect();
        if next.len() == kept.len() || next.is_empty() {
            break;
        }
        kept = next;
    }
    kept
}

/// Result of the full filter chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredAverage {
    pub value: f64,
    pub survivors: usize,
}

/// Median band filter, iterated trim, then the mean of what is left.
pub fn filtered_average(samples: &[f64], p1: f64, p2: f64, q: f64, k: usize) -> Option<FilteredAverage> {
    let banded = median_band_filter(samples, p1, p2);
    let trimmed = iterated_trim(&banded, q, k);
    mean(&trimmed).map(|value| FilteredAverage {
        value,
        survivors: trimmed.len(),
    })
}
