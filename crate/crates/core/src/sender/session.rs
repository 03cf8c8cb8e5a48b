// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! One capacity-test session: probing, completion, report collection.

use super::aggregate::{aggregate_reports, AggregationParams, CapacityEstimate, EstimateError};
use super::{ConfigError, SendDecision, SenderConfig, SenderEngine};
use crate::protocol::{CompletionFrame, ProbeFrame, ReportFrame};

/// Default wait for reports after the completion notice: twice the helper
/// idle timeout.
pub const DEFAULT_REPORT_DEADLINE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub sender: SenderConfig,
    pub aggregation: AggregationParams,
    /// Seconds to wait for reports once completion was announced.
    pub report_deadline: f64,
}

impl SessionConfig {
    pub fn new(sender: SenderConfig) -> Self {
        Self {
            sender,
            aggregation: AggregationParams::default(),
            report_deadline: DEFAULT_REPORT_DEADLINE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionAction {
    Probe { helper: usize, frame: ProbeFrame },
    /// Send this completion notice to every helper.
    Complete(CompletionFrame),
    /// Nothing to do before `at`, unless an event (report, app-buffer
    /// change) arrives earlier.
    WaitUntil(f64),
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Probing,
    AwaitingReports { deadline: f64 },
    Finished,
}

#[derive(Debug, Clone)]
pub struct CapacitySession {
    engine: SenderEngine,
    aggregation: AggregationParams,
    report_deadline: f64,
    phase: Phase,
    reports: Vec<Option<ReportFrame>>,
    outcome: Option<Result<CapacityEstimate, EstimateError>>,
}

impl CapacitySession {
    pub fn new(cfg: SessionConfig) -> Result<Self, ConfigError> {
        let n = cfg.sender.n_helpers;
        Ok(Self {
            engine: SenderEngine::new(cfg.sender)?,
            aggregation: cfg.aggregation,
            report_deadline: cfg.report_deadline,
            phase: Phase::Probing,
            reports: vec![None; n],
            outcome: None,
        })
    }

    pub fn engine(&self) -> &SenderEngine {
        &self.engine
    }

    pub fn n_helpers(&self) -> usize {
        self.reports.len()
    }

    pub fn account_app_traffic(&mut self, bytes: u64) -> u64 {
        self.engine.account_app_traffic(bytes)
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    pub fn is_probing(&self) -> bool {
        self.phase == Phase::Probing
    }

    /// Per-helper reports received so far.
    pub fn reports(&self) -> &[Option<ReportFrame>] {
        &self.reports
    }

    pub fn outcome(&self) -> Option<&Result<CapacityEstimate, EstimateError>> {
        self.outcome.as_ref()
    }

    pub fn poll(&mut self, now: f64, app_buffer_bytes: u64) -> SessionAction {
        match self.phase {
            Phase::Probing => match self.engine.schedule_next(now, app_buffer_bytes) {
                SendDecision::Probe { helper, frame } => SessionAction::Probe { helper, frame },
                SendDecision::Defer { until } | SendDecision::Throttled { until } => {
                    SessionAction::WaitUntil(until)
                }
                SendDecision::Exhausted => {
                    self.phase = Phase::AwaitingReports {
                        deadline: now + self.report_deadline,
                    };
                    SessionAction::Complete(CompletionFrame {
                        tab_total_bytes: self.engine.tab(),
                    })
                }
            },
            Phase::AwaitingReports { deadline } => {
                if now >= deadline {
                    self.finish();
                    SessionAction::Finished
                } else {
                    SessionAction::WaitUntil(deadline)
                }
            }
            Phase::Finished => SessionAction::Finished,
        }
    }

    /// Records a helper's report. The first report per helper counts;
    /// the session finishes as soon as every helper has answered.
    pub fn on_report(&mut self, helper: usize, report: ReportFrame) {
        if self.phase == Phase::Finished || helper >= self.reports.len() {
            return;
        }
        if report.sample_count == 0 {
            return;
        }
        self.reports[helper].get_or_insert(report);
        if self.reports.iter().all(Option::is_some)
            && matches!(self.phase, Phase::AwaitingReports { .. })
        {
            self.finish();
        }
    }

    fn finish(&mut self) {
        let values: Vec<f64> = self
            .reports
            .iter()
            .flatten()
            .map(|r| r.uavg_bps as f64)
            .collect();
        self.outcome = Some(aggregate_reports(
            &values,
            &self.aggregation,
            self.reports.len(),
        ));
        self.phase = Phase::Finished;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(n: usize) -> CapacitySession {
        CapacitySession::new(SessionConfig::new(SenderConfig::uniform(n, 2, 100))).unwrap()
    }

    fn report(u: u64) -> ReportFrame {
        ReportFrame {
            uavg_bps: u,
            sample_count: 3,
        }
    }

    #[test]
    fn full_lifecycle() {
        let mut s = session(3);
        let mut probes = 0;
        let completion = loop {
            match s.poll(0.0, 0) {
                SessionAction::Probe { .. } => probes += 1,
                SessionAction::Complete(c) => break c,
                other => panic!("{other:?}"),
            }
        };
        assert_eq!(probes, 6);
        assert_eq!(completion.tab_total_bytes, 600);
        assert_eq!(s.poll(1.0, 0), SessionAction::WaitUntil(10.0));
        s.on_report(0, report(1000));
        s.on_report(1, report(1000));
        assert!(!s.is_finished());
        s.on_report(2, report(1000));
        assert!(s.is_finished());
        let est = s.outcome().unwrap().as_ref().unwrap();
        assert!(est.confident);
        assert_eq!(est.value_bps, 1000.0);
    }

    #[test]
    fn deadline_without_reports() {
        let mut s = session(2);
        while !matches!(s.poll(0.0, 0), SessionAction::Complete(_)) {}
        assert_eq!(s.poll(10.0, 0), SessionAction::Finished);
        assert_eq!(s.outcome(), Some(&Err(EstimateError::NoReports)));
    }

    #[test]
    fn duplicate_and_late_reports() {
        let mut s = session(2);
        while !matches!(s.poll(0.0, 0), SessionAction::Complete(_)) {}
        s.on_report(0, report(500));
        s.on_report(0, report(9999));
        assert_eq!(s.reports()[0], Some(report(500)));
        assert_eq!(s.poll(10.0, 0), SessionAction::Finished);
        s.on_report(1, report(500));
        assert_eq!(s.reports()[1], None);
        let est = s.outcome().unwrap().as_ref().unwrap();
        // ceil(0.6 * 2) = 2 reports needed.
        assert!(!est.confident);
    }
}
