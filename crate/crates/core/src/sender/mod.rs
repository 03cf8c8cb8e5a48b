// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Source side of a capacity test.
//!
//! [`SenderEngine`] decides which helper receives the next probe and keeps
//! the cumulative byte counter (TAB). Application traffic is folded into the
//! counter through [`SenderEngine::account_app_traffic`]; those bytes go to a
//! virtual helper that never appears in the schedule and never reports.
//! [`CapacitySession`] wraps the engine with completion and report
//! collection. Both are sans-IO: drivers (the simulator, real sockets) feed
//! them time and events.

pub mod aggregate;
pub mod aub;
pub mod limiter;
pub mod ping;
pub mod session;

use crate::protocol::{ProbeFrame, PROBE_HEADER_LEN};
use limiter::RateLimiter;
use thiserror::Error;

pub use aggregate::{aggregate_reports, AggregationParams, CapacityEstimate, EstimateError};
pub use aub::{aub_search, AubResult, AubSearchParams, AubStep, RateProbe};
pub use ping::{IncrementalProber, PingProbe, PingProbeParams, PingSample, PingStats};
pub use session::{CapacitySession, SessionAction, SessionConfig};

pub const DEFAULT_APP_BUFFER_THRESHOLD: u64 = 64 * 1024;
pub const DEFAULT_MAX_PROBE_GAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SendOrder {
    RoundRobin,
    /// A permutation of `0..n`, repeated cyclically.
    Custom(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenderConfig {
    pub n_helpers: usize,
    /// Probes destined to each helper.
    pub packets_per_helper: Vec<u32>,
    /// Full frame length (header + padding) of each helper's probes.
    pub packet_size: Vec<u32>,
    pub send_order: SendOrder,
    /// Above this many queued application bytes, probes may be deferred.
    pub app_buffer_threshold: u64,
    /// Longest deferral between two helper-directed probes (seconds).
    pub max_probe_gap: f64,
    pub rate_limit: Option<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("at least one helper is required")]
    NoHelpers,
    #[error("expected {expected} per-helper entries in {field}, got {got}")]
    Length {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("helper {helper}: packet size {size} is below the {PROBE_HEADER_LEN}-byte probe header")]
    PacketTooSmall { helper: usize, size: u32 },
    #[error("helper {helper}: packet size {size} exceeds the wire limit")]
    PacketTooLarge { helper: usize, size: u32 },
    #[error("custom send order is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("rate limit must be positive, got {0}")]
    RateLimit(f64),
    #[error("max probe gap must be positive, got {0}")]
    ProbeGap(f64),
}

impl SenderConfig {
    /// `n` helpers, `packets` probes of `size` bytes each, round-robin.
    pub fn uniform(n: usize, packets: u32, size: u32) -> Self {
        Self {
            n_helpers: n,
            packets_per_helper: vec![packets; n],
            packet_size: vec![size; n],
            send_order: SendOrder::RoundRobin,
            app_buffer_threshold: DEFAULT_APP_BUFFER_THRESHOLD,
            max_probe_gap: DEFAULT_MAX_PROBE_GAP,
            rate_limit: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n_helpers;
        if n == 0 {
            return Err(ConfigError::NoHelpers);
        }
        for (field, got) in [
            ("packets_per_helper", self.packets_per_helper.len()),
            ("packet_size", self.packet_size.len()),
        ] {
            if got != n {
                return Err(ConfigError::Length {
                    field,
                    expected: n,
                    got,
                });
            }
        }
        for (helper, &size) in self.packet_size.iter().enumerate() {
            if (size as usize) < PROBE_HEADER_LEN {
                return Err(ConfigError::PacketTooSmall { helper, size });
            }
            if size as usize > PROBE_HEADER_LEN + crate::protocol::MAX_PAYLOAD as usize {
                return Err(ConfigError::PacketTooLarge { helper, size });
            }
        }
        if let SendOrder::Custom(order) = &self.send_order {
            let mut seen = vec![false; n];
            let ok = order.len() == n
                && order
                    .iter()
                    .all(|&i| i < n && !std::mem::replace(&mut seen[i], true));
            if !ok {
                return Err(ConfigError::NotAPermutation(n));
            }
        }
        if let Some(r) = self.rate_limit {
            if !(r > 0.0) {
                return Err(ConfigError::RateLimit(r));
            }
        }
        if !(self.max_probe_gap > 0.0) {
            return Err(ConfigError::ProbeGap(self.max_probe_gap));
        }
        Ok(())
    }

    pub fn max_packet_size(&self) -> u32 {
        self.packet_size.iter().copied().max().unwrap_or(0)
    }

    pub fn total_probes(&self) -> u64 {
        self.packets_per_helper.iter().map(|&m| m as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SendDecision {
    Probe { helper: usize, frame: ProbeFrame },
    /// Application traffic keeps the link busy; ask again at `until` or when
    /// the application buffer drains.
    Defer { until: f64 },
    /// The rate limit is exhausted until `until`.
    Throttled { until: f64 },
    /// Every helper has received its probes.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct SenderEngine {
    cfg: SenderConfig,
    order: Vec<usize>,
    cursor: usize,
    sent: Vec<u32>,
    tab: u64,
    last_probe_at: Option<f64>,
    last_target: Option<usize>,
    limiter: Option<RateLimiter>,
}

impl SenderEngine {
    pub fn new(cfg: SenderConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let order = match &cfg.send_order {
            SendOrder::RoundRobin => (0..cfg.n_helpers).collect(),
            SendOrder::Custom(p) => p.clone(),
        };
        let limiter = cfg
            .rate_limit
            .map(|r| RateLimiter::with_default_tick(r, cfg.max_packet_size() as u64));
        Ok(Self {
            sent: vec![0; cfg.n_helpers],
            order,
            cursor: 0,
            tab: 0,
            last_probe_at: None,
            last_target: None,
            limiter,
            cfg,
        })
    }

    pub fn config(&self) -> &SenderConfig {
        &self.cfg
    }

    /// Cumulative bytes sent so far, probes and accounted app traffic.
    pub fn tab(&self) -> u64 {
        self.tab
    }

    pub fn sent_per_helper(&self) -> &[u32] {
        &self.sent
    }

    pub fn last_target(&self) -> Option<usize> {
        self.last_target
    }

    pub fn is_exhausted(&self) -> bool {
        self.sent
            .iter()
            .zip(&self.cfg.packets_per_helper)
            .all(|(s, m)| s >= m)
    }

    /// Counts application bytes handed to the uplink (virtual helper).
    pub fn account_app_traffic(&mut self, bytes: u64) -> u64 {
        self.tab += bytes;
        self.tab
    }

    fn next_helper(&self) -> Option<(usize, usize)> {
        let n = self.order.len();
        (0..n)
            .map(|step| (self.cursor + step) % n)
            .find(|&pos| {
                let h = self.order[pos];
                self.sent[h] < self.cfg.packets_per_helper[h]
            })
            .map(|pos| (pos, self.order[pos]))
    }

    pub fn schedule_next(&mut self, now: f64, app_buffer_bytes: u64) -> SendDecision {
        let Some((pos, helper)) = self.next_helper() else {
            return SendDecision::Exhausted;
        };
        if app_buffer_bytes > self.cfg.app_buffer_threshold {
            if let Some(last) = self.last_probe_at {
                // Same expression as the returned deadline, so asking again
                // exactly at `until` is never deferred by rounding.
                let until = last + self.cfg.max_probe_gap;
                if now < until {
                    return SendDecision::Defer { until };
                }
            }
        }
        let size = self.cfg.packet_size[helper];
        if let Some(lim) = &mut self.limiter {
            if let Err(until) = lim.try_send(now, size as u64) {
                return SendDecision::Throttled { until };
            }
        }
        self.tab += size as u64;
        self.sent[helper] += 1;
        self.cursor = (pos + 1) % self.order.len();
        self.last_probe_at = Some(now);
        self.last_target = Some(helper);
        SendDecision::Probe {
            helper,
            frame: ProbeFrame::with_wire_len(self.tab, size as usize),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(engine: &mut SenderEngine) -> Vec<(usize, u64)> {
        let mut out = Vec::new();
        while let SendDecision::Probe { helper, frame } = engine.schedule_next(0.0, 0) {
            out.push((helper, frame.tab_total_bytes));
        }
        out
    }

    #[test]
    fn round_robin_wraps() {
        let mut e = SenderEngine::new(SenderConfig::uniform(4, 3, 100)).unwrap();
        let targets: Vec<usize> = drain(&mut e).into_iter().map(|p| p.0).collect();
        assert_eq!(targets, vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3]);
        assert_eq!(e.schedule_next(0.0, 0), SendDecision::Exhausted);
    }

    #[test]
    fn tab_includes_own_frame() {
        let mut e = SenderEngine::new(SenderConfig::uniform(2, 2, 1024)).unwrap();
        let SendDecision::Probe { frame, .. } = e.schedule_next(0.0, 0) else {
            panic!()
        };
        assert_eq!(frame.tab_total_bytes, 1024);
        assert_eq!(frame.wire_len(), 1024);
        assert_eq!(frame.payload_len(), 1024 - PROBE_HEADER_LEN);
    }

    #[test]
    fn unequal_counts_avoid_repeats() {
        let cfg = SenderConfig {
            packets_per_helper: vec![1, 4, 2],
            ..SenderConfig::uniform(3, 0, 64)
        };
        let mut e = SenderEngine::new(cfg).unwrap();
        let targets: Vec<usize> = drain(&mut e).into_iter().map(|p| p.0).collect();
        assert_eq!(targets, vec![0, 1, 2, 1, 2, 1, 1]);
    }

    #[test]
    fn custom_order() {
        let cfg = SenderConfig {
            send_order: SendOrder::Custom(vec![2, 0, 1]),
            ..SenderConfig::uniform(3, 2, 64)
        };
        let mut e = SenderEngine::new(cfg).unwrap();
        let targets: Vec<usize> = drain(&mut e).into_iter().map(|p| p.0).collect();
        assert_eq!(targets, vec![2, 0, 1, 2, 0, 1]);

        let bad = SenderConfig {
            send_order: SendOrder::Custom(vec![0, 0, 1]),
            ..SenderConfig::uniform(3, 2, 64)
        };
        assert_eq!(SenderEngine::new(bad).unwrap_err(), ConfigError::NotAPermutation(3));
    }

    #[test]
    fn defers_while_app_busy() {
        let mut e = SenderEngine::new(SenderConfig::uniform(2, 10, 1000)).unwrap();
        assert!(matches!(e.schedule_next(0.0, 0), SendDecision::Probe { .. }));
        let busy = 10 * 1024 * 1024;
        assert_eq!(e.schedule_next(0.1, busy), SendDecision::Defer { until: 0.5 });
        // Gap exceeded: the probe goes out anyway.
        assert!(matches!(
            e.schedule_next(0.5, busy),
            SendDecision::Probe { helper: 1, .. }
        ));
        // Empty buffer: immediate.
        assert!(matches!(
            e.schedule_next(0.51, 0),
            SendDecision::Probe { helper: 0, .. }
        ));
    }

    #[test]
    fn app_traffic_advances_tab() {
        let mut e = SenderEngine::new(SenderConfig::uniform(1, 2, 1000)).unwrap();
        e.schedule_next(0.0, 0);
        assert_eq!(e.account_app_traffic(500), 1500);
        assert_eq!(e.account_app_traffic(0), 1500);
        let SendDecision::Probe { frame, .. } = e.schedule_next(0.0, 0) else {
            panic!()
        };
        assert_eq!(frame.tab_total_bytes, 2500);
    }

    #[test]
    fn throttled_by_limit() {
        let cfg = SenderConfig {
            rate_limit: Some(10_000.0),
            ..SenderConfig::uniform(1, 10, 1000)
        };
        let mut e = SenderEngine::new(cfg).unwrap();
        assert!(matches!(e.schedule_next(0.0, 0), SendDecision::Probe { .. }));
        // 1000 bytes went out in the first tick; credit reaches 1000 only
        // by the end of the second.
        assert_eq!(e.schedule_next(0.0, 0), SendDecision::Throttled { until: 0.05 });
        assert_eq!(e.schedule_next(0.05, 0), SendDecision::Throttled { until: 0.1 });
        assert!(matches!(e.schedule_next(0.1, 0), SendDecision::Probe { .. }));
    }

    #[test]
    fn config_rejections() {
        assert_eq!(
            SenderConfig::uniform(0, 1, 100).validate(),
            Err(ConfigError::NoHelpers)
        );
        assert!(matches!(
            SenderConfig::uniform(2, 1, 8).validate(),
            Err(ConfigError::PacketTooSmall { .. })
        ));
        let cfg = SenderConfig {
            rate_limit: Some(0.0),
            ..SenderConfig::uniform(1, 1, 100)
        };
        assert_eq!(cfg.validate(), Err(ConfigError::RateLimit(0.0)));
    }

    proptest::proptest! {
        #[test]
        fn tab_strictly_increases_and_accounts_exactly(
            n in 1usize..6,
            m in 1u32..8,
            size in 17u32..5000,
            app in proptest::collection::vec(0u64..10_000, 0..64),
        ) {
            let mut e = SenderEngine::new(SenderConfig::uniform(n, m, size)).unwrap();
            let mut last_tab = 0;
            let mut last_helper: Option<usize> = None;
            let mut window: Vec<usize> = Vec::new();
            let mut app_iter = app.into_iter();
            loop {
                let app_bytes = app_iter.next().unwrap_or(0);
                let before = e.tab();
                e.account_app_traffic(app_bytes);
                match e.schedule_next(0.0, 0) {
                    SendDecision::Probe { helper, frame } => {
                        proptest::prop_assert!(frame.tab_total_bytes > last_tab);
                        // Growth between probes is exactly probe + app bytes.
                        proptest::prop_assert_eq!(frame.tab_total_bytes - before, size as u64 + app_bytes);
                        if n >= 2 {
                            proptest::prop_assert_ne!(Some(helper), last_helper);
                        }
                        last_tab = frame.tab_total_bytes;
                        last_helper = Some(helper);
                        window.push(helper);
                    }
                    SendDecision::Exhausted => break,
                    other => proptest::prop_assert!(false, "unexpected {:?}", other),
                }
            }
            for chunk in window.windows(n) {
                let mut seen = chunk.to_vec();
                seen.sort_unstable();
                proptest::prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
