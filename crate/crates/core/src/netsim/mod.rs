// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Deterministic discrete-event model of the source's uplink.
//!
//! One FIFO link of capacity `sub_bps` carries probe frames, completion
//! notices and background chunks. A frame leaving the link is serialized on
//! its helper path (`ab_bps`, shared with the other paths of its bottleneck
//! group), then delivered after the path latency plus a uniform jitter draw.
//! Loss is an independent Bernoulli draw per frame. Reports travel back
//! after the path's base latency and are never lost.
//!
//! Echo RTTs follow a queue model: base RTT plus the time needed to drain
//! whatever is queued on the link when the ping is sent.

pub mod scenario;
pub mod trace;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::helper::{Acceptance, ArrivalRecord, Finalization, HelperEngine};
use crate::protocol::{ReportFrame, COMPLETION_LEN, REPORT_LEN};
use crate::sender::{CapacitySession, PingSample, SessionAction};
pub use scenario::{
    ping_probe_run, rate_limited_run, run_capacity_test, SimPingProbe, SimRateProbe, SimRun,
};
pub use trace::{write_trace_csv, TraceKind, TraceRecord, TRACE_HEADER};

/// Size of a background chunk.
pub const BACKGROUND_CHUNK: u64 = 4096;
pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub ab_bps: f64,
    pub base_latency: f64,
    /// Upper bound of the uniform extra delay.
    pub jitter: f64,
    pub loss_prob: f64,
    /// Paths with the same group id share one serialization queue.
    pub shared_bottleneck_group: Option<u32>,
}

impl PathConfig {
    pub fn clean(ab_bps: f64, base_latency: f64) -> Self {
        Self {
            ab_bps,
            base_latency,
            jitter: 0.0,
            loss_prob: 0.0,
            shared_bottleneck_group: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundFlow {
    pub rate_bps: f64,
    pub start: f64,
    pub end: f64,
    /// Accounted flows are application traffic the sender knows about: their
    /// bytes advance TAB and count toward the application buffer.
    pub accounted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PingConfig {
    pub base_rtt: f64,
    pub timeout: f64,
}

impl Default for PingConfig {
    fn default() -> Self {
        Self {
            base_rtt: 0.03,
            timeout: 20.0,
        }
    }
}

/// How many of its own frames the sender keeps queued on the link.
///
/// A small window models a sender that writes only when its socket buffer
/// has room, so background traffic gets its share of the link. `Unbounded`
/// leaves pacing entirely to the rate limiter, and the queue can grow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenderWindow {
    Frames(u32),
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub sub_bps: f64,
    pub paths: Vec<PathConfig>,
    pub background_flows: Vec<BackgroundFlow>,
    pub ping: PingConfig,
    pub seed: u64,
    /// Per-packet framing overhead charged on the link and paths but not
    /// counted in TAB.
    pub link_overhead_bytes: u64,
    pub sender_window: SenderWindow,
    pub max_events: u64,
    pub record_trace: bool,
}

impl SimConfig {
    pub fn new(sub_bps: f64, paths: Vec<PathConfig>) -> Self {
        Self {
            sub_bps,
            paths,
            background_flows: Vec::new(),
            ping: PingConfig::default(),
            seed: 0,
            link_overhead_bytes: 0,
            sender_window: SenderWindow::Frames(2),
            max_events: DEFAULT_MAX_EVENTS,
            record_trace: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sub_bps > 0.0 && self.sub_bps.is_finite()) {
            return Err(SimError::Config(format!("sub_bps must be positive, got {}", self.sub_bps)));
        }
        for (i, p) in self.paths.iter().enumerate() {
            if !(p.ab_bps > 0.0 && p.ab_bps.is_finite()) {
                return Err(SimError::Config(format!("path {i}: ab_bps must be positive, got {}", p.ab_bps)));
            }
            if !(0.0..=1.0).contains(&p.loss_prob) {
                return Err(SimError::Config(format!("path {i}: loss_prob must be in [0, 1], got {}", p.loss_prob)));
            }
            if !(p.base_latency >= 0.0 && p.jitter >= 0.0) {
                return Err(SimError::Config(format!("path {i}: latency and jitter must be non-negative")));
            }
        }
        for (i, f) in self.background_flows.iter().enumerate() {
            if !(f.rate_bps > 0.0 && f.start >= 0.0 && f.end >= f.start) {
                return Err(SimError::Config(format!("background flow {i}: need rate > 0 and 0 <= start <= end")));
            }
        }
        if let SenderWindow::Frames(0) = self.sender_window {
            return Err(SimError::Config("sender window must hold at least one frame".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error("event limit of {0} reached")]
    EventLimit(u64),
}

/// Byte accounting over every packet ever enqueued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ByteLedger {
    pub enqueued: u64,
    pub delivered: u64,
    pub lost: u64,
    pub in_flight: u64,
}

impl ByteLedger {
    pub fn balanced(&self) -> bool {
        self.delivered + self.lost + self.in_flight == self.enqueued
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Payload {
    Probe { tab: u64 },
    Completion,
    App,
    Background,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Packet {
    payload: Payload,
    dest: Option<usize>,
    bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
enum Event {
    SenderWake { generation: u64 },
    LinkDone(Packet),
    Deliver(Packet),
    HelperTimer { helper: usize },
    Report { helper: usize, report: ReportFrame },
    FlowChunk { flow: usize, k: u64 },
    Ping { k: u64 },
}

#[derive(Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the earliest (time, seq) first.
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone)]
struct PingSchedule {
    interval: f64,
    until: f64,
    landmarks: Vec<f64>,
}

pub struct Simulator {
    cfg: SimConfig,
    now: f64,
    heap: BinaryHeap<Scheduled>,
    seq: u64,
    events: u64,
    rng: ChaCha8Rng,
    link_free_at: f64,
    busy_slot: Vec<usize>,
    busy_until: Vec<f64>,
    ledger: ByteLedger,
    trace: Vec<TraceRecord>,

    session: Option<CapacitySession>,
    helpers: Vec<HelperEngine>,
    arrivals: Vec<Vec<ArrivalRecord>>,
    timer_pending: Vec<bool>,
    own_in_link: u32,
    window_blocked: bool,
    wake_generation: u64,
    app_in_link: u64,

    pings: Option<PingSchedule>,
    ping_samples: Vec<PingSample>,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("now", &self.now)
            .field("events", &self.events)
            .field("pending", &self.heap.len())
            .field("ledger", &self.ledger)
            .finish_non_exhaustive()
    }
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        // One busy-until accumulator per group, and one per ungrouped path.
        let mut groups: Vec<(u32, usize)> = Vec::new();
        let mut slots = 0;
        let mut busy_slot = Vec::with_capacity(cfg.paths.len());
        for p in &cfg.paths {
            let known = p
                .shared_bottleneck_group
                .and_then(|g| groups.iter().find(|e| e.0 == g).map(|e| e.1));
            let slot = known.unwrap_or_else(|| {
                if let Some(g) = p.shared_bottleneck_group {
                    groups.push((g, slots));
                }
                slots += 1;
                slots - 1
            });
            busy_slot.push(slot);
        }
        let mut sim = Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            now: 0.0,
            heap: BinaryHeap::new(),
            seq: 0,
            events: 0,
            link_free_at: 0.0,
            busy_slot,
            busy_until: vec![0.0; slots],
            ledger: ByteLedger::default(),
            trace: Vec::new(),
            session: None,
            helpers: Vec::new(),
            arrivals: Vec::new(),
            timer_pending: Vec::new(),
            own_in_link: 0,
            window_blocked: false,
            wake_generation: 0,
            app_in_link: 0,
            pings: None,
            ping_samples: Vec::new(),
            cfg,
        };
        for (flow, f) in sim.cfg.background_flows.clone().iter().enumerate() {
            if f.end > f.start {
                sim.schedule(f.start, Event::FlowChunk { flow, k: 0 });
            }
        }
        Ok(sim)
    }

    /// Attaches a capacity session and one helper engine per path. The
    /// sender starts polling at the current time.
    pub fn with_session(
        mut self,
        session: CapacitySession,
        helpers: Vec<HelperEngine>,
    ) -> Result<Self, SimError> {
        let n = self.cfg.paths.len();
        if session.n_helpers() != n || helpers.len() != n {
            return Err(SimError::Config(format!(
                "{n} paths but {} session helpers and {} helper engines",
                session.n_helpers(),
                helpers.len()
            )));
        }
        self.session = Some(session);
        self.arrivals = vec![Vec::new(); n];
        self.timer_pending = vec![false; n];
        for (i, h) in helpers.iter().enumerate() {
            if let Some(d) = h.idle_deadline() {
                self.timer_pending[i] = true;
                self.schedule(d, Event::HelperTimer { helper: i });
            }
        }
        self.helpers = helpers;
        self.wake_sender(self.now);
        Ok(self)
    }

    /// Pings one landmark every `interval` seconds, cycling through the
    /// given base RTTs, for sends strictly before `until`. An empty list
    /// uses the configured base RTT.
    pub fn with_pings(mut self, interval: f64, until: f64, landmarks: Vec<f64>) -> Self {
        let landmarks = if landmarks.is_empty() {
            vec![self.cfg.ping.base_rtt]
        } else {
            landmarks
        };
        if interval > 0.0 && until > self.now {
            self.schedule(self.now, Event::Ping { k: 0 });
        }
        self.pings = Some(PingSchedule {
            interval,
            until,
            landmarks,
        });
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn session(&self) -> Option<&CapacitySession> {
        self.session.as_ref()
    }

    pub fn helpers(&self) -> &[HelperEngine] {
        &self.helpers
    }

    /// Accepted arrivals per helper, in acceptance order.
    pub fn arrivals(&self) -> &[Vec<ArrivalRecord>] {
        &self.arrivals
    }

    pub fn ping_samples(&self) -> &[PingSample] {
        &self.ping_samples
    }

    pub fn ledger(&self) -> ByteLedger {
        let in_flight = self
            .heap
            .iter()
            .map(|s| match &s.event {
                Event::LinkDone(p) | Event::Deliver(p) => p.bytes,
                _ => 0,
            })
            .sum();
        ByteLedger {
            in_flight,
            ..self.ledger
        }
    }

    /// Bytes waiting on or being sent over the link at `now`, in seconds
    /// of link time.
    pub fn queue_delay(&self, now: f64) -> f64 {
        (self.link_free_at - now).max(0.0)
    }

    fn schedule(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.heap.push(Scheduled {
            time,
            seq: self.seq,
            event,
        });
    }

    fn record(&mut self, kind: TraceKind, helper: Option<usize>, bytes: Option<u64>, rtt: Option<f64>) {
        if self.cfg.record_trace {
            self.trace.push(TraceRecord {
                time: self.now,
                kind,
                helper,
                bytes,
                rtt,
            });
        }
    }

    /// Puts `bytes` on the FIFO link at `now`, destined to helper `dest`
    /// (`None` for traffic leaving toward the wider network). Returns the
    /// time the last byte leaves the link.
    pub fn enqueue_send(&mut self, now: f64, dest: Option<usize>, bytes: u64) -> f64 {
        self.enqueue(
            now,
            Packet {
                payload: Payload::Raw,
                dest,
                bytes,
            },
        )
    }

    fn enqueue(&mut self, now: f64, packet: Packet) -> f64 {
        debug_assert!(packet.bytes > 0);
        let wire = (packet.bytes + self.cfg.link_overhead_bytes) as f64;
        let done = self.link_free_at.max(now) + wire / self.cfg.sub_bps;
        self.link_free_at = done;
        self.ledger.enqueued += packet.bytes;
        self.record(TraceKind::Enqueue, packet.dest, Some(packet.bytes), None);
        self.schedule(done, Event::LinkDone(packet));
        done
    }

    /// Serializes `bytes` on `path` once they left the link at `link_done`
    /// and returns the delivery time at the helper.
    pub fn path_delivery_time(&mut self, path: usize, link_done: f64, bytes: u64) -> f64 {
        let p = &self.cfg.paths[path];
        let slot = self.busy_slot[path];
        let wire = (bytes + self.cfg.link_overhead_bytes) as f64;
        let done = link_done.max(self.busy_until[slot]) + wire / p.ab_bps;
        self.busy_until[slot] = done;
        let jitter = if p.jitter > 0.0 {
            p.jitter * self.rng.random::<f64>()
        } else {
            0.0
        };
        done + p.base_latency + jitter
    }

    /// RTT of an echo sent now toward a landmark with the given base RTT,
    /// or `None` past the ping timeout.
    pub fn ping_rtt(&self, now: f64, base_rtt: f64) -> Option<f64> {
        let rtt = base_rtt + self.queue_delay(now);
        (rtt <= self.cfg.ping.timeout).then_some(rtt)
    }

    fn done(&self) -> bool {
        let session_done = self.session.as_ref().map_or(true, |s| s.is_finished());
        let pings_done = self.pings.as_ref().map_or(true, |p| {
            !self
                .heap
                .iter()
                .any(|s| matches!(s.event, Event::Ping { .. }) && s.time < p.until)
        });
        session_done && pings_done && (self.session.is_some() || self.pings.is_some())
    }

    /// Processes events until the session and ping schedule are done, the
    /// queue is empty, or the next event lies past `until`.
    pub fn run(&mut self, until: f64) -> Result<(), SimError> {
        while !self.done() {
            match self.heap.peek() {
                None => break,
                Some(s) if s.time > until => {
                    self.now = until;
                    break;
                }
                Some(_) => {
                    self.step()?;
                }
            }
        }
        Ok(())
    }

    /// Processes one event. Returns `false` when nothing is left.
    pub fn step(&mut self) -> Result<bool, SimError> {
        if self.events >= self.cfg.max_events {
            return Err(SimError::EventLimit(self.cfg.max_events));
        }
        let Some(Scheduled { time, event, .. }) = self.heap.pop() else {
            return Ok(false);
        };
        self.events += 1;
        debug_assert!(time >= self.now);
        self.now = time;
        match event {
            Event::SenderWake { generation } => {
                if generation == self.wake_generation {
                    self.poll_sender();
                }
            }
            Event::LinkDone(packet) => self.on_link_done(packet),
            Event::Deliver(packet) => self.on_deliver(packet),
            Event::HelperTimer { helper } => {
                self.timer_pending[helper] = false;
                match self.helpers[helper].on_tick(self.now) {
                    Some(fin) => self.on_finalized(helper, fin),
                    None => self.arm_timer(helper),
                }
            }
            Event::Report { helper, report } => {
                self.record(TraceKind::Report, Some(helper), Some(REPORT_LEN as u64), None);
                if let Some(s) = &mut self.session {
                    s.on_report(helper, report);
                }
            }
            Event::FlowChunk { flow, k } => self.on_flow_chunk(flow, k),
            Event::Ping { k } => self.on_ping(k),
        }
        Ok(true)
    }

    fn wake_sender(&mut self, at: f64) {
        self.wake_generation += 1;
        let generation = self.wake_generation;
        self.schedule(at, Event::SenderWake { generation });
    }

    fn window_full(&self) -> bool {
        match self.cfg.sender_window {
            SenderWindow::Frames(w) => self.own_in_link >= w,
            SenderWindow::Unbounded => false,
        }
    }

    fn poll_sender(&mut self) {
        self.window_blocked = false;
        loop {
            let full = self.window_full();
            let Some(session) = &mut self.session else {
                return;
            };
            if session.is_probing() && full {
                self.window_blocked = true;
                return;
            }
            match session.poll(self.now, self.app_in_link) {
                SessionAction::Probe { helper, frame } => {
                    self.own_in_link += 1;
                    let packet = Packet {
                        payload: Payload::Probe {
                            tab: frame.tab_total_bytes,
                        },
                        dest: Some(helper),
                        bytes: frame.wire_len() as u64,
                    };
                    self.enqueue(self.now, packet);
                }
                SessionAction::Complete(_) => {
                    for helper in 0..self.cfg.paths.len() {
                        let packet = Packet {
                            payload: Payload::Completion,
                            dest: Some(helper),
                            bytes: COMPLETION_LEN as u64,
                        };
                        self.enqueue(self.now, packet);
                    }
                }
                SessionAction::WaitUntil(t) => {
                    self.wake_sender(t);
                    return;
                }
                SessionAction::Finished => return,
            }
        }
    }

    fn on_link_done(&mut self, packet: Packet) {
        self.record(TraceKind::LinkDone, packet.dest, Some(packet.bytes), None);
        match packet.payload {
            Payload::Probe { .. } => {
                self.own_in_link -= 1;
                if self.window_blocked {
                    self.poll_sender();
                }
            }
            Payload::App => {
                let threshold = self
                    .session
                    .as_ref()
                    .map_or(u64::MAX, |s| s.engine().config().app_buffer_threshold);
                let before = self.app_in_link;
                self.app_in_link -= packet.bytes;
                if before > threshold && self.app_in_link <= threshold && !self.window_blocked {
                    self.wake_sender(self.now);
                }
            }
            _ => {}
        }
        let Some(path) = packet.dest.filter(|&d| d < self.cfg.paths.len()) else {
            self.ledger.delivered += packet.bytes;
            return;
        };
        let loss = self.cfg.paths[path].loss_prob;
        if loss > 0.0 && self.rng.random_bool(loss) {
            self.ledger.lost += packet.bytes;
            self.record(TraceKind::Loss, Some(path), Some(packet.bytes), None);
            return;
        }
        let at = self.path_delivery_time(path, self.now, packet.bytes);
        self.schedule(at, Event::Deliver(packet));
    }

    fn on_deliver(&mut self, packet: Packet) {
        self.ledger.delivered += packet.bytes;
        let helper = packet.dest.expect("delivered packets have a destination");
        self.record(TraceKind::Delivery, Some(helper), Some(packet.bytes), None);
        if helper >= self.helpers.len() {
            return;
        }
        match packet.payload {
            Payload::Probe { tab } => {
                if let Acceptance::Accepted { .. } = self.helpers[helper].accept_frame(tab, self.now) {
                    self.arrivals[helper].push(ArrivalRecord { tab, t: self.now });
                    self.arm_timer(helper);
                }
            }
            Payload::Completion => {
                if let Some(fin) = self.helpers[helper].on_completion() {
                    self.on_finalized(helper, fin);
                }
            }
            _ => {}
        }
    }

    fn arm_timer(&mut self, helper: usize) {
        if self.timer_pending[helper] {
            return;
        }
        if let Some(d) = self.helpers[helper].idle_deadline() {
            self.timer_pending[helper] = true;
            self.schedule(d, Event::HelperTimer { helper });
        }
    }

    fn on_finalized(&mut self, helper: usize, fin: Finalization) {
        if let Finalization::Report(report) = fin {
            let at = self.now + self.cfg.paths[helper].base_latency;
            self.schedule(at, Event::Report { helper, report });
        }
    }

    fn on_flow_chunk(&mut self, flow: usize, k: u64) {
        let f = &self.cfg.background_flows[flow];
        let accounted = f.accounted;
        let next = f.start + (k + 1) as f64 * BACKGROUND_CHUNK as f64 / f.rate_bps;
        let end = f.end;
        let payload = if accounted {
            if let Some(s) = &mut self.session {
                s.account_app_traffic(BACKGROUND_CHUNK);
            }
            self.app_in_link += BACKGROUND_CHUNK;
            Payload::App
        } else {
            Payload::Background
        };
        self.enqueue(
            self.now,
            Packet {
                payload,
                dest: None,
                bytes: BACKGROUND_CHUNK,
            },
        );
        if next < end {
            self.schedule(next, Event::FlowChunk { flow, k: k + 1 });
        }
    }

    fn on_ping(&mut self, k: u64) {
        let Some(sched) = &self.pings else {
            return;
        };
        let base = sched.landmarks[k as usize % sched.landmarks.len()];
        let next = self.now + sched.interval;
        let more = next < sched.until;
        let rtt = self.ping_rtt(self.now, base);
        self.ping_samples.push(PingSample {
            sent_at: self.now,
            rtt,
        });
        match rtt {
            Some(r) => self.record(TraceKind::Ping, None, None, Some(r)),
            None => self.record(TraceKind::PingTimeout, None, None, None),
        }
        if more {
            self.schedule(next, Event::Ping { k: k + 1 });
        }
    }
}
