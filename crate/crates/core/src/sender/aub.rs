// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Available-upload-bandwidth search.
//!
//! A rate limit `R` passes when the capacity estimate measured under that
//! limit satisfies `U(R) >= cr * R`. The search doubles `R` from `r0` while
//! it passes, then bisects between the last passing and first failing rate
//! down to `resolution`.
//!
//! With `cr < 1` the largest passing limit overshoots the available
//! bandwidth by up to a factor `1 / cr`: above the available bandwidth the
//! measured throughput saturates, so `U(R) >= cr * R` keeps holding until
//! `R = AUB / cr`. The throughput measured at that limit is therefore the
//! available-bandwidth estimate, and is reported next to the limit itself.

use thiserror::Error;

/// Measures the upload estimate obtained under a rate limit.
pub trait RateProbe {
    type Error;

    fn measure(&mut self, rate: f64, duration: f64) -> Result<f64, Self::Error>;
}

impl<F, E> RateProbe for F
where
    F: FnMut(f64, f64) -> Result<f64, E>,
{
    type Error = E;

    fn measure(&mut self, rate: f64, duration: f64) -> Result<f64, E> {
        self(rate, duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AubSearchParams {
    /// Acceptance ratio in `U(R) >= cr * R`.
    pub cr: f64,
    pub r0: f64,
    /// The bisection stops when the bracket is at most this wide.
    pub resolution: f64,
    /// Test length for each probed rate (seconds).
    pub per_rate_duration: f64,
    /// Cap on doubling steps.
    pub max_doublings: u32,
}

impl Default for AubSearchParams {
    fn default() -> Self {
        Self {
            cr: 0.9,
            r0: 25_000.0,
            resolution: 2_000.0,
            per_rate_duration: 20.0,
            max_doublings: 40,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AubParamError {
    #[error("cr must be in (0, 1], got {0}")]
    Cr(f64),
    #[error("initial rate must be positive, got {0}")]
    R0(f64),
    #[error("resolution must be positive, got {0}")]
    Resolution(f64),
    #[error("per-rate duration must be positive, got {0}")]
    Duration(f64),
}

impl AubSearchParams {
    pub fn validate(&self) -> Result<(), AubParamError> {
        if !(self.cr > 0.0 && self.cr <= 1.0) {
            return Err(AubParamError::Cr(self.cr));
        }
        if !(self.r0 > 0.0) {
            return Err(AubParamError::R0(self.r0));
        }
        if !(self.resolution > 0.0) {
            return Err(AubParamError::Resolution(self.resolution));
        }
        if !(self.per_rate_duration > 0.0) {
            return Err(AubParamError::Duration(self.per_rate_duration));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AubStep {
    pub rate: f64,
    pub measured: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AubResult {
    /// Largest limit that passed, if any did.
    pub largest_passing_rate: Option<f64>,
    /// Throughput measured at that limit.
    pub estimate_bps: Option<f64>,
    /// Every probed rate in the order it was tried.
    pub ladder: Vec<AubStep>,
}

#[derive(Debug, Error)]
pub enum AubError<E> {
    #[error(transparent)]
    Params(#[from] AubParamError),
    #[error("measurement failed: {0}")]
    Probe(E),
}

pub fn aub_search<P: RateProbe>(
    params: &AubSearchParams,
    probe: &mut P,
) -> Result<AubResult, AubError<P::Error>> {
    params.validate()?;
    let mut ladder = Vec::new();
    let mut test = |rate: f64, ladder: &mut Vec<AubStep>| -> Result<bool, AubError<P::Error>> {
        let measured = probe
            .measure(rate, params.per_rate_duration)
            .map_err(AubError::Probe)?;
        let passed = measured >= params.cr * rate;
        ladder.push(AubStep {
            rate,
            measured,
            passed,
        });
        Ok(passed)
    };

    let mut lo = 0.0;
    let mut hi = params.r0;
    let mut doublings = 0;
    while test(hi, &mut ladder)? {
        lo = hi;
        if doublings == params.max_doublings {
            break;
        }
        hi *= 2.0;
        doublings += 1;
    }
    if lo < hi {
        while hi - lo > params.resolution {
            let mid = 0.5 * (lo + hi);
            if test(mid, &mut ladder)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    let best = ladder
        .iter()
        .rev()
        .find(|s| s.passed && s.rate == lo)
        .copied();
    Ok(AubResult {
        largest_passing_rate: best.map(|s| s.rate),
        estimate_bps: best.map(|s| s.measured),
        ladder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    /// Saturating link: throughput is min(R, aub).
    fn saturating(aub: f64) -> impl FnMut(f64, f64) -> Result<f64, Infallible> {
        move |r, _| Ok(r.min(aub))
    }

    #[test]
    fn saturating_link_overshoots_by_one_over_cr() {
        let params = AubSearchParams {
            cr: 0.9,
            r0: 10_000.0,
            resolution: 100.0,
            ..Default::default()
        };
        let res = aub_search(&params, &mut saturating(100_000.0)).unwrap();
        let r = res.largest_passing_rate.unwrap();
        assert!((r - 100_000.0 / 0.9).abs() <= 100.0, "{r}");
        assert_eq!(res.estimate_bps, Some(100_000.0));
    }

    #[test]
    fn cr_one_finds_the_knee() {
        let params = AubSearchParams {
            cr: 1.0,
            r0: 1_000.0,
            resolution: 50.0,
            ..Default::default()
        };
        let res = aub_search(&params, &mut saturating(77_777.0)).unwrap();
        let r = res.largest_passing_rate.unwrap();
        assert!(r <= 77_777.0 && r > 77_777.0 - 50.0, "{r}");
    }

    #[test]
    fn bracket_invariant() {
        let params = AubSearchParams {
            r0: 3_000.0,
            resolution: 10.0,
            ..Default::default()
        };
        let mut probe = saturating(50_000.0);
        let res = aub_search(&params, &mut probe).unwrap();
        let r = res.largest_passing_rate.unwrap();
        let next = r + params.resolution;
        assert!(probe(r, 1.0).unwrap() >= params.cr * r);
        assert!(probe(next, 1.0).unwrap() < params.cr * next);
        // Doubling phase visits r0 * 2^k in order.
        assert_eq!(res.ladder[0].rate, 3_000.0);
        assert_eq!(res.ladder[1].rate, 6_000.0);
    }

    #[test]
    fn failing_r0_bisects_below() {
        let params = AubSearchParams {
            r0: 100_000.0,
            resolution: 500.0,
            ..Default::default()
        };
        let res = aub_search(&params, &mut saturating(20_000.0)).unwrap();
        assert!(!res.ladder[0].passed);
        let r = res.largest_passing_rate.unwrap();
        assert!(r <= 20_000.0 / 0.9 && r > 20_000.0 / 0.9 - 500.0, "{r}");
    }

    #[test]
    fn nothing_passes() {
        let params = AubSearchParams {
            r0: 1_000.0,
            resolution: 10.0,
            ..Default::default()
        };
        let res = aub_search(&params, &mut |_r: f64, _d: f64| Ok::<_, Infallible>(0.0)).unwrap();
        assert_eq!(res.largest_passing_rate, None);
        assert_eq!(res.estimate_bps, None);
    }

    #[test]
    fn rejects_bad_params() {
        for cr in [0.0, 1.5, f64::NAN] {
            let params = AubSearchParams {
                cr,
                ..Default::default()
            };
            assert!(matches!(
                aub_search(&params, &mut saturating(1.0)),
                Err(AubError::Params(AubParamError::Cr(_)))
            ));
        }
    }
}
