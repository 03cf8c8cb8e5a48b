// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Ping-based headroom checks.
//!
//! The source uploads at a fixed rate while echoing landmarks; the upload
//! rate is acceptable when enough round-trip times stay under a threshold
//! and timeouts do not come in long runs.

use crate::helper::filter::median;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PingProbeParams {
    /// Upload rate during the test (bytes/second).
    pub rate: f64,
    /// Test length (seconds).
    pub duration: f64,
    pub ping_interval: f64,
    /// RTTs at or below this count as good.
    pub rtt_threshold: f64,
    /// RTTs above this are timeouts.
    pub ping_timeout: f64,
    /// Required fraction of good pings.
    pub quality_fraction: f64,
    /// Increment used when adjusting the rate.
    pub rate_step: f64,
    /// Longest tolerated run of consecutive timeouts.
    pub max_timeout_run: usize,
}

impl Default for PingProbeParams {
    fn default() -> Self {
        Self {
            rate: 25_600.0,
            duration: 600.0,
            ping_interval: 1.0,
            rtt_threshold: 0.5,
            ping_timeout: 20.0,
            quality_fraction: 0.9,
            rate_step: 1_024.0,
            max_timeout_run: 3,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PingParamError {
    #[error("duration must be positive, got {0}")]
    Duration(f64),
    #[error("ping interval must be positive, got {0}")]
    Interval(f64),
    #[error("quality fraction must be in (0, 1], got {0}")]
    Quality(f64),
    #[error("ping timeout {timeout} is below the RTT threshold {threshold}")]
    Timeout { timeout: f64, threshold: f64 },
    #[error("rate must be non-negative, got {0}")]
    Rate(f64),
}

impl PingProbeParams {
    pub fn validate(&self) -> Result<(), PingParamError> {
        if !(self.duration > 0.0) {
            return Err(PingParamError::Duration(self.duration));
        }
        if !(self.ping_interval > 0.0) {
            return Err(PingParamError::Interval(self.ping_interval));
        }
        if !(self.quality_fraction > 0.0 && self.quality_fraction <= 1.0) {
            return Err(PingParamError::Quality(self.quality_fraction));
        }
        if !(self.ping_timeout >= self.rtt_threshold) {
            return Err(PingParamError::Timeout {
                timeout: self.ping_timeout,
                threshold: self.rtt_threshold,
            });
        }
        if !(self.rate >= 0.0) {
            return Err(PingParamError::Rate(self.rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PingSample {
    /// Send time (seconds since the test start).
    pub sent_at: f64,
    /// `None` for a timeout.
    pub rtt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PingStats {
    pub samples: Vec<PingSample>,
    pub timeouts: usize,
    pub below_threshold_fraction: f64,
    pub median_rtt: Option<f64>,
    pub longest_timeout_run: usize,
    pub quality: bool,
}

impl PingStats {
    /// Summarizes raw samples. Answers slower than `ping_timeout` are
    /// reclassified as timeouts.
    pub fn from_samples(raw: &[PingSample], params: &PingProbeParams) -> Self {
        let samples: Vec<PingSample> = raw
            .iter()
            .map(|s| PingSample {
                sent_at: s.sent_at,
                rtt: s.rtt.filter(|&r| r <= params.ping_timeout),
            })
            .collect();
        let answered: Vec<f64> = samples.iter().filter_map(|s| s.rtt).collect();
        let timeouts = samples.len() - answered.len();
        let good = answered
            .iter()
            .filter(|&&r| r <= params.rtt_threshold)
            .count();
        let below_threshold_fraction = if samples.is_empty() {
            0.0
        } else {
            good as f64 / samples.len() as f64
        };
        let mut longest_timeout_run = 0;
        let mut run = 0;
        for s in &samples {
            if s.rtt.is_none() {
                run += 1;
                longest_timeout_run = longest_timeout_run.max(run);
            } else {
                run = 0;
            }
        }
        let quality = !samples.is_empty()
            && below_threshold_fraction >= params.quality_fraction
            && longest_timeout_run <= params.max_timeout_run;
        Self {
            median_rtt: median(&answered).ok(),
            samples,
            timeouts,
            below_threshold_fraction,
            longest_timeout_run,
            quality,
        }
    }

    pub fn rtts(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().filter_map(|s| s.rtt)
    }
}

/// Runs an upload at a given rate while pinging landmarks.
pub trait PingProbe {
    type Error;

    fn run(&mut self, params: &PingProbeParams) -> Result<PingStats, Self::Error>;
}

/// Highest passing rate, if any, and every probed rate with its verdict.
pub type Convergence = (Option<f64>, Vec<(f64, bool)>);

/// Walks the rate by `rate_step` from `params.rate`: upward while the
/// quality condition holds, downward while it does not. Returns the highest
/// rate that passed, if any, and every probed rate with its verdict.
pub fn converge_rate<P: PingProbe>(
    params: &PingProbeParams,
    probe: &mut P,
    max_steps: usize,
) -> Result<Convergence, P::Error> {
    let mut history = Vec::new();
    let mut rate = params.rate;
    let mut best = None;
    let mut direction = None;
    for _ in 0..max_steps {
        if rate < 0.0 {
            break;
        }
        let stats = probe.run(&PingProbeParams { rate, ..*params })?;
        history.push((rate, stats.quality));
        let up = stats.quality;
        if up {
            best = Some(best.map_or(rate, |b: f64| b.max(rate)));
        }
        match direction {
            None => direction = Some(up),
            Some(d) if d != up => break,
            _ => {}
        }
        rate += if up { params.rate_step } else { -params.rate_step };
    }
    Ok((best, history))
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum StepError<E> {
    #[error("next test allowed once the application reaches {required} B/s (now {current} B/s)")]
    Gated { required: f64, current: f64 },
    #[error("step must be positive, got {0}")]
    Step(f64),
    #[error("probe failed: {0}")]
    Probe(E),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadroomVerdict {
    pub headroom: bool,
    pub tested_rate: f64,
    pub stats: PingStats,
}

/// Incremental headroom checks for an application uploading at `U`.
///
/// Each check uploads at `U + R`. After a positive verdict the next check is
/// only allowed once the application itself reaches `U + R`, so the probe
/// never generates more traffic than the application can use.
#[derive(Debug, Clone, Default)]
pub struct IncrementalProber {
    next_allowed_rate: Option<f64>,
}

impl IncrementalProber {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_allowed_rate(&self) -> Option<f64> {
        self.next_allowed_rate
    }

    pub fn step<P: PingProbe>(
        &mut self,
        app_rate: f64,
        step: f64,
        params: &PingProbeParams,
        probe: &mut P,
    ) -> Result<HeadroomVerdict, StepError<P::Error>> {
        if !(step > 0.0) {
            return Err(StepError::Step(step));
        }
        if let Some(required) = self.next_allowed_rate {
            if app_rate < required {
                return Err(StepError::Gated {
                    required,
                    current: app_rate,
                });
            }
        }
        let tested_rate = app_rate + step;
        let stats = probe
            .run(&PingProbeParams {
                rate: tested_rate,
                ..*params
            })
            .map_err(StepError::Probe)?;
        let headroom = stats.quality;
        self.next_allowed_rate = if headroom { Some(tested_rate) } else { None };
        Ok(HeadroomVerdict {
            headroom,
            tested_rate,
            stats,
        })
    }
}
