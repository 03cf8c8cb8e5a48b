// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Sender procedures wired to the simulator.

use super::{ByteLedger, SimConfig, SimError, Simulator, TraceRecord};
use crate::helper::{ArrivalRecord, FilterParams, HelperEngine};
use crate::protocol::ReportFrame;
use crate::sender::{
    CapacityEstimate, CapacitySession, EstimateError, PingProbe, PingProbeParams, PingStats,
    RateProbe, SenderConfig, SessionConfig,
};

#[derive(Debug, Clone)]
pub struct SimRun {
    /// `None` only if the run stopped before the session finished.
    pub outcome: Option<Result<CapacityEstimate, EstimateError>>,
    pub reports: Vec<Option<ReportFrame>>,
    /// Accepted arrivals per helper.
    pub arrivals: Vec<Vec<ArrivalRecord>>,
    /// Raw throughput samples per helper, before filtering.
    pub samples: Vec<Vec<f64>>,
    pub trace: Vec<TraceRecord>,
    pub ledger: ByteLedger,
    pub end_time: f64,
    pub events: u64,
}

impl SimRun {
    /// Estimate value, confident or not.
    pub fn value_bps(&self) -> Option<f64> {
        match &self.outcome {
            Some(Ok(e)) => Some(e.value_bps),
            _ => None,
        }
    }

    pub fn is_confident(&self) -> bool {
        matches!(&self.outcome, Some(Ok(e)) if e.confident)
    }
}

fn build(sim: &SimConfig, session: &SessionConfig, filter: &FilterParams) -> Result<Simulator, SimError> {
    filter
        .validate()
        .map_err(|e| SimError::Config(e.to_string()))?;
    session
        .aggregation
        .validate()
        .map_err(|e| SimError::Config(e.to_string()))?;
    let s = CapacitySession::new(session.clone()).map_err(|e| SimError::Config(e.to_string()))?;
    let helpers = (0..session.sender.n_helpers)
        .map(|_| HelperEngine::new(*filter, 0.0))
        .collect();
    Simulator::new(sim.clone())?.with_session(s, helpers)
}

fn finish(sim: Simulator) -> SimRun {
    let session = sim.session().expect("capacity runs carry a session");
    SimRun {
        outcome: session.outcome().cloned(),
        reports: session.reports().to_vec(),
        arrivals: sim.arrivals().to_vec(),
        samples: sim.helpers().iter().map(|h| h.samples().to_vec()).collect(),
        ledger: sim.ledger(),
        end_time: sim.now(),
        events: sim.events_processed(),
        trace: sim.trace,
    }
}

/// Runs one capacity test to completion: probes, completion notices,
/// reports until every helper answered or the report deadline passed.
pub fn run_capacity_test(
    sim: &SimConfig,
    session: &SessionConfig,
    filter: &FilterParams,
) -> Result<SimRun, SimError> {
    let mut s = build(sim, session, filter)?;
    s.run(f64::INFINITY)?;
    Ok(finish(s))
}

/// Probes per helper so that a test at `rate` lasts about `duration`.
fn packets_for(rate: f64, duration: f64, n: usize, size: u32) -> u32 {
    let m = (rate * duration / (n as f64 * size as f64)).ceil();
    m.clamp(2.0, u32::MAX as f64) as u32
}

/// Capacity test with the sender limited to `rate` bytes/second, sized to
/// last about `duration` seconds. Returns the estimate value, or 0 when no
/// helper reported.
pub fn rate_limited_run(
    sim: &SimConfig,
    session: &SessionConfig,
    filter: &FilterParams,
    rate: f64,
    duration: f64,
) -> Result<f64, SimError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SimError::Config(format!("rate limit must be positive, got {rate}")));
    }
    if !(duration > 0.0) {
        return Err(SimError::Config(format!("duration must be positive, got {duration}")));
    }
    let sender = &session.sender;
    let m = packets_for(rate, duration, sender.n_helpers, sender.max_packet_size());
    let limited = SessionConfig {
        sender: SenderConfig {
            packets_per_helper: vec![m; sender.n_helpers],
            rate_limit: Some(rate),
            ..sender.clone()
        },
        ..session.clone()
    };
    let run = run_capacity_test(sim, &limited, filter)?;
    Ok(run.value_bps().unwrap_or(0.0))
}

/// [`RateProbe`] backed by [`rate_limited_run`].
#[derive(Debug, Clone)]
pub struct SimRateProbe {
    pub sim: SimConfig,
    pub session: SessionConfig,
    pub filter: FilterParams,
}

impl RateProbe for SimRateProbe {
    type Error = SimError;

    fn measure(&mut self, rate: f64, duration: f64) -> Result<f64, SimError> {
        rate_limited_run(&self.sim, &self.session, &self.filter, rate, duration)
    }
}

/// Uploads at `params.rate` toward the configured helper paths in
/// `frame_size`-byte frames while pinging the landmarks, for
/// `params.duration` seconds. Landmarks are given as base RTTs.
pub fn ping_probe_run(
    sim: &SimConfig,
    params: &PingProbeParams,
    landmarks: &[f64],
    frame_size: u32,
) -> Result<PingStats, SimError> {
    params
        .validate()
        .map_err(|e| SimError::Config(e.to_string()))?;
    let mut cfg = sim.clone();
    cfg.ping.timeout = params.ping_timeout;
    let n = cfg.paths.len();
    let mut s = if params.rate > 0.0 && n > 0 {
        let m = packets_for(params.rate, params.duration, n, frame_size) + 1;
        let sender = SenderConfig {
            rate_limit: Some(params.rate),
            ..SenderConfig::uniform(n, m, frame_size)
        };
        let session = CapacitySession::new(SessionConfig::new(sender))
            .map_err(|e| SimError::Config(e.to_string()))?;
        let helpers = (0..n)
            .map(|_| HelperEngine::new(FilterParams::default(), 0.0))
            .collect();
        Simulator::new(cfg)?.with_session(session, helpers)?
    } else {
        Simulator::new(cfg)?
    };
    s = s.with_pings(params.ping_interval, params.duration, landmarks.to_vec());
    s.run(params.duration)?;
    Ok(PingStats::from_samples(s.ping_samples(), params))
}

/// [`PingProbe`] backed by [`ping_probe_run`].
#[derive(Debug, Clone)]
pub struct SimPingProbe {
    pub sim: SimConfig,
    pub landmarks: Vec<f64>,
    pub frame_size: u32,
}

impl PingProbe for SimPingProbe {
    type Error = SimError;

    fn run(&mut self, params: &PingProbeParams) -> Result<PingStats, SimError> {
        ping_probe_run(&self.sim, params, &self.landmarks, self.frame_size)
    }
}
