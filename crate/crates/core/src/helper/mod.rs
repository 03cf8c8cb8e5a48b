// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Receiver side of a capacity test.
//!
//! A [`HelperEngine`] is fed probe frames together with their local receive
//! time. Each accepted probe after the first yields one throughput sample
//! `(tab - tab_prev) / (t - t_prev)`. When the source signals completion, or
//! nothing arrives for `idle_timeout` seconds, the engine finalizes and
//! produces a [`ReportFrame`] from the filtered samples.

pub mod filter;

use crate::protocol::{Frame, ReportFrame};
use thiserror::Error;

pub use filter::{filtered_average, iterated_trim, median, median_band_filter, FilteredAverage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// Lower median factor.
    pub p1: f64,
    /// Upper median factor.
    pub p2: f64,
    /// Standard-deviation band factor for the trim rounds.
    pub q: f64,
    /// Trimming stops once this many samples (or fewer) remain.
    pub k: usize,
    /// Samples required before a sliding-window estimate is produced.
    pub min_p: usize,
    /// Silence (seconds) after which the test is treated as complete.
    pub idle_timeout: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            p1: 0.2,
            p2: 5.0,
            q: 1.0,
            k: 3,
            min_p: 5,
            idle_timeout: 5.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("need 0 <= p1 <= 1 <= p2, got p1={p1}, p2={p2}")]
    MedianBand { p1: f64, p2: f64 },
    #[error("q must be positive, got {0}")]
    Q(f64),
    #[error("K must be at least 1")]
    K,
    #[error("MinP must be at least 2, got {0}")]
    MinP(usize),
    #[error("idle timeout must be positive, got {0}")]
    IdleTimeout(f64),
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0.0..=1.0).contains(&self.p1) || !(self.p2 >= 1.0) {
            return Err(ParamError::MedianBand {
                p1: self.p1,
                p2: self.p2,
            });
        }
        if !(self.q > 0.0) {
            return Err(ParamError::Q(self.q));
        }
        if self.k == 0 {
            return Err(ParamError::K);
        }
        if self.min_p < 2 {
            return Err(ParamError::MinP(self.min_p));
        }
        if !(self.idle_timeout > 0.0) {
            return Err(ParamError::IdleTimeout(self.idle_timeout));
        }
        Ok(())
    }

    pub fn average(&self, samples: &[f64]) -> Option<FilteredAverage> {
        filtered_average(samples, self.p1, self.p2, self.q, self.k)
    }
}

/// An accepted probe: its counter value and local receive time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalRecord {
    pub tab: u64,
    pub t: f64,
}

/// One throughput estimate in bytes/second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationSample {
    pub u_bps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscardReason {
    /// The counter did not exceed the last accepted one (duplicate,
    /// reordered or replayed frame).
    StaleTab,
    /// The test has already been finalized.
    Finalized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acceptance {
    Accepted { sample: Option<EstimationSample> },
    Discarded(DiscardReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finalization {
    Report(ReportFrame),
    /// No sample survived (or none was ever taken).
    NoReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HelperEvent {
    Frame(Acceptance),
    Finalized(Finalization),
    /// A frame type a helper does not consume (e.g. a report).
    Ignored,
}

/// Decides how many recent samples a continuous-mode estimate uses. The
/// default is the fixed `min_p` window.
pub trait WindowPolicy: Send {
    fn window_len(&self, min_p: usize, last: Option<(u64, f64)>) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FixedWindow;

impl WindowPolicy for FixedWindow {
    fn window_len(&self, min_p: usize, _last: Option<(u64, f64)>) -> usize {
        min_p
    }
}

pub struct HelperEngine {
    params: FilterParams,
    last: Option<ArrivalRecord>,
    last_delta: Option<(u64, f64)>,
    samples: Vec<f64>,
    last_activity: f64,
    finalized: Option<Finalization>,
    clock_anomalies: u64,
    discarded: u64,
    window: Box<dyn WindowPolicy>,
}

impl std::fmt::Debug for HelperEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HelperEngine")
            .field("params", &self.params)
            .field("last", &self.last)
            .field("samples", &self.samples.len())
            .field("finalized", &self.finalized)
            .finish_non_exhaustive()
    }
}

impl HelperEngine {
    /// Creates an engine whose idle timer starts at `now`.
    pub fn new(params: FilterParams, now: f64) -> Self {
        Self {
            params,
            last: None,
            last_delta: None,
            samples: Vec::new(),
            last_activity: now,
            finalized: None,
            clock_anomalies: 0,
            discarded: 0,
            window: Box::new(FixedWindow),
        }
    }

    pub fn with_window_policy(mut self, policy: Box<dyn WindowPolicy>) -> Self {
        self.window = policy;
        self
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn last_accepted(&self) -> Option<ArrivalRecord> {
        self.last
    }

    pub fn clock_anomalies(&self) -> u64 {
        self.clock_anomalies
    }

    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized.is_some()
    }

    pub fn finalization(&self) -> Option<Finalization> {
        self.finalized
    }

    /// When the idle timer fires if nothing else arrives.
    pub fn idle_deadline(&self) -> Option<f64> {
        if self.finalized.is_some() {
            None
        } else {
            Some(self.last_activity + self.params.idle_timeout)
        }
    }

    pub fn accept_frame(&mut self, tab: u64, now: f64) -> Acceptance {
        if self.finalized.is_some() {
            self.discarded += 1;
            return Acceptance::Discarded(DiscardReason::Finalized);
        }
        let sample = match self.last {
            Some(prev) if tab <= prev.tab => {
                self.discarded += 1;
                return Acceptance::Discarded(DiscardReason::StaleTab);
            }
            Some(prev) => {
                let dtab = tab - prev.tab;
                let dt = now - prev.t;
                if dt > 0.0 {
                    let u = dtab as f64 / dt;
                    self.samples.push(u);
                    self.last_delta = Some((dtab, dt));
                    Some(EstimationSample { u_bps: u })
                } else {
                    self.clock_anomalies += 1;
                    None
                }
            }
            None => None,
        };
        self.last = Some(ArrivalRecord { tab, t: now });
        self.last_activity = now;
        Acceptance::Accepted { sample }
    }

    pub fn on_frame(&mut self, frame: &Frame, now: f64) -> HelperEvent {
        match frame {
            Frame::Probe(p) => HelperEvent::Frame(self.accept_frame(p.tab_total_bytes, now)),
            Frame::Completion(_) => match self.finalize() {
                Some(f) => HelperEvent::Finalized(f),
                None => HelperEvent::Frame(Acceptance::Discarded(DiscardReason::Finalized)),
            },
            Frame::Report(_) => HelperEvent::Ignored,
        }
    }

    /// Finalizes on an explicit completion notice. Returns `None` if the
    /// engine was already finalized.
    pub fn on_completion(&mut self) -> Option<Finalization> {
        self.finalize()
    }

    /// Finalizes if the idle timeout has elapsed at `now`.
    pub fn on_tick(&mut self, now: f64) -> Option<Finalization> {
        match self.idle_deadline() {
            Some(deadline) if now >= deadline => self.finalize(),
            _ => None,
        }
    }

    fn finalize(&mut self) -> Option<Finalization> {
        if self.finalized.is_some() {
            return None;
        }
        let f = match self.report() {
            Some(r) => Finalization::Report(r),
            None => Finalization::NoReport,
        };
        self.finalized = Some(f);
        Some(f)
    }

    /// Filtered average over every sample collected so far.
    pub fn report(&self) -> Option<ReportFrame> {
        let avg = self.params.average(&self.samples)?;
        Some(ReportFrame {
            uavg_bps: avg.value.round() as u64,
            sample_count: avg.survivors as u32,
        })
    }

    /// Continuous-mode estimate over the most recent window of samples.
    pub fn sliding_estimate(&self) -> Option<f64> {
        let len = self
            .window
            .window_len(self.params.min_p, self.last_delta)
            .max(1);
        if self.samples.len() < len {
            return None;
        }
        let window = &self.samples[self.samples.len() - len..];
        self.params.average(window).map(|a| a.value)
    }
}
