// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use crate::helper::filter::{mean, median};
use thiserror::Error;

/// Closeness test parameters applied to the helpers' reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationParams {
    pub p3: f64,
    pub p4: f64,
    /// Fraction of received reports that must be close to the median.
    pub pa: f64,
    /// Fraction of helpers that must report at all.
    pub pb: f64,
}

impl Default for AggregationParams {
    fn default() -> Self {
        Self {
            p3: 0.8,
            p4: 1.2,
            pa: 0.6,
            pb: 0.6,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationParamError {
    #[error("need 0 <= p3 <= 1 <= p4, got p3={p3}, p4={p4}")]
    Band { p3: f64, p4: f64 },
    #[error("PA must be in (0, 1], got {0}")]
    Pa(f64),
    #[error("PB must be in (0, 1], got {0}")]
    Pb(f64),
}

impl AggregationParams {
    pub fn validate(&self) -> Result<(), AggregationParamError> {
        if !(0.0..=1.0).contains(&self.p3) || !(self.p4 >= 1.0) {
            return Err(AggregationParamError::Band {
                p3: self.p3,
                p4: self.p4,
            });
        }
        if !(self.pa > 0.0 && self.pa <= 1.0) {
            return Err(AggregationParamError::Pa(self.pa));
        }
        if !(self.pb > 0.0 && self.pb <= 1.0) {
            return Err(AggregationParamError::Pb(self.pb));
        }
        Ok(())
    }

    /// `ceil(pb * n)`, the number of reports required for confidence.
    pub fn required_reports(&self, n: usize) -> usize {
        // 0.6 * 5 must give 3, not 4.
        (self.pb * n as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    pub value_bps: f64,
    /// Enough helpers answered and enough of them agree.
    pub confident: bool,
    /// Reports that entered the final average.
    pub reports_used: Vec<f64>,
    pub reports_received: usize,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum EstimateError {
    #[error("no helper reported an estimate")]
    NoReports,
}

/// Combines the helpers' averages into one capacity estimate.
///
/// Values within `[p3 * median, p4 * median]` are "close"; their mean is the
/// estimate. Confidence requires at least `ceil(pb * n)` reports and a close
/// fraction of at least `pa`. When too few helpers answered, the median of
/// what did arrive is returned unflagged.
pub fn aggregate_reports(
    reports: &[f64],
    params: &AggregationParams,
    n: usize,
) -> Result<CapacityEstimate, EstimateError> {
    let umd = median(reports).map_err(|_| EstimateError::NoReports)?;
    if reports.len() < params.required_reports(n) {
        return Ok(CapacityEstimate {
            value_bps: umd,
            confident: false,
            reports_used: reports.to_vec(),
            reports_received: reports.len(),
        });
    }
    let (lo, hi) = (params.p3 * umd, params.p4 * umd);
    let close: Vec<f64> = reports
        .iter()
        .copied()
        .filter(|&v| v >= lo && v <= hi)
        .collect();
    let fraction = close.len() as f64 / reports.len() as f64;
    let value_bps = mean(&close).unwrap_or(umd);
    Ok(CapacityEstimate {
        value_bps,
        confident: fraction >= params.pa,
        reports_used: close,
        reports_received: reports.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let est = aggregate_reports(
            &[240000.0, 238000.0, 242000.0, 120000.0, 236000.0],
            &AggregationParams::default(),
            5,
        )
        .unwrap();
        assert!(est.confident);
        assert_eq!(est.value_bps, 239000.0);
        assert_eq!(est.reports_used.len(), 4);
        assert_eq!(est.reports_received, 5);
    }

    #[test]
    fn all_equal() {
        let est = aggregate_reports(&[5e5; 4], &AggregationParams::default(), 4).unwrap();
        assert!(est.confident);
        assert_eq!(est.value_bps, 5e5);
    }

    #[test]
    fn too_few_reports() {
        let params = AggregationParams::default();
        assert_eq!(params.required_reports(5), 3);
        assert_eq!(params.required_reports(3), 2);
        let est = aggregate_reports(&[1000.0, 1010.0], &params, 5).unwrap();
        assert!(!est.confident);
        assert_eq!(est.value_bps, 1005.0);
    }

    #[test]
    fn disagreement_is_flagged() {
        // Median 200: only 200 and 210 fall in [160, 240].
        let est = aggregate_reports(&[100.0, 200.0, 210.0, 400.0, 50.0], &AggregationParams::default(), 5)
            .unwrap();
        assert!(!est.confident);
        assert_eq!(est.value_bps, 205.0);
    }

    #[test]
    fn empty_is_no_estimate() {
        assert_eq!(
            aggregate_reports(&[], &AggregationParams::default(), 3),
            Err(EstimateError::NoReports)
        );
    }

    proptest! {
        #[test]
        fn permutation_and_scale(
            reports in proptest::collection::vec(1e3f64..1e7, 1..12),
            extra in 0usize..4,
            seed in any::<u64>(),
            // Powers of two keep the scaling exact.
            exp in -8i32..8,
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let n = reports.len() + extra;
            let params = AggregationParams::default();
            let base = aggregate_reports(&reports, &params, n).unwrap();
            let mut shuffled = reports.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let perm = aggregate_reports(&shuffled, &params, n).unwrap();
            prop_assert_eq!(base.confident, perm.confident);
            prop_assert!((base.value_bps - perm.value_bps).abs() <= 1e-9 * base.value_bps);

            let c = 2f64.powi(exp);
            let scaled: Vec<f64> = reports.iter().map(|r| r * c).collect();
            let s = aggregate_reports(&scaled, &params, n).unwrap();
            prop_assert_eq!(base.confident, s.confident);
            prop_assert!((s.value_bps - c * base.value_bps).abs() <= 1e-9 * s.value_bps);
        }

        #[test]
        fn confidence_implies_quorum(reports in proptest::collection::vec(1e3f64..1e7, 1..12), extra in 0usize..8) {
            let n = reports.len() + extra;
            let params = AggregationParams::default();
            let est = aggregate_reports(&reports, &params, n).unwrap();
            if est.confident {
                prop_assert!(est.reports_received >= params.required_reports(n));
                prop_assert!(est.reports_used.len() as f64 / est.reports_received as f64 >= params.pa);
            }
        }
    }
}
