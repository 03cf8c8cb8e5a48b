// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Capacity tests over real sockets.
//!
//! UDP carries one frame per datagram. TCP opens one connection per helper
//! and frames the byte stream; reports come back on the same connection.

use std::io::{self, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs, UdpSocket};
use std::path::PathBuf;
use std::thread::sleep;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use upbw_core::helper::{Acceptance, Finalization, FilterParams, HelperEngine, HelperEvent};
use upbw_core::protocol::{
    decode_datagram, encode_into, Frame, ReportFrame, StreamDecoder, PROBE_HEADER_LEN,
};
use upbw_core::sender::{
    aggregate_reports, AggregationParams, CapacityEstimate, CapacitySession, SenderConfig,
    SessionAction, SessionConfig,
};

use crate::args::{AggregationArgs, FilterArgs};
use crate::report::{opt, RunReport};
use crate::Outcome;

/// Largest UDP payload over IPv4.
const MAX_DATAGRAM: usize = 65_507;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Role {
    Sender,
    Helper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Transport {
    Udp,
    Tcp,
}

impl Transport {
    fn name(self) -> &'static str {
        match self {
            Transport::Udp => "udp",
            Transport::Tcp => "tcp",
        }
    }
}

/// Sender-side flags, shared with `aub` when it runs over real sockets.
#[derive(Debug, Clone, Args)]
pub struct PeerArgs {
    /// Helper addresses (host:port), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub peers: Vec<String>,
    #[arg(long, value_enum, default_value = "udp")]
    pub transport: Transport,
    /// Seconds to wait for reports after the completion notice.
    #[arg(long, default_value_t = 10.0)]
    pub report_deadline: f64,
    /// TCP connect timeout in seconds.
    #[arg(long, default_value_t = 2.0)]
    pub connect_timeout: f64,
}

/// Sender table columns: helper, address, reachable, probes_sent,
/// report_Bps, report_samples. Helper table columns: session, source,
/// probes_accepted, samples, discarded, report_Bps, report_samples,
/// finalized_by.
#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_enum)]
    pub role: Role,
    #[command(flatten)]
    pub peer: PeerArgs,
    /// Probes per helper.
    #[arg(long, default_value_t = 20)]
    pub packets: u32,
    /// Probe frame size in bytes, header included.
    #[arg(long, default_value_t = 8192)]
    pub size: u32,
    /// Sender rate limit (bytes/s).
    #[arg(long)]
    pub rate: Option<f64>,
    /// Helper listen address; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:0")]
    pub bind: String,
    /// Sessions a helper serves before exiting; 0 serves until no probe
    /// arrives within --wait.
    #[arg(long, default_value_t = 1)]
    pub sessions: u32,
    /// Seconds a helper waits for a session to start.
    #[arg(long, default_value_t = 60.0)]
    pub wait: f64,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub aggregation: AggregationArgs,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(a: &EstimateArgs) -> Result<Outcome> {
    match a.role {
        Role::Sender => run_sender(a),
        Role::Helper => run_helper(a),
    }
}

fn resolve(addr: &str) -> Result<SocketAddr> {
    addr.to_socket_addrs()
        .with_context(|| format!("cannot resolve `{addr}`"))?
        .next()
        .with_context(|| format!("`{addr}` has no address"))
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

fn secs(s: f64) -> Duration {
    Duration::from_secs_f64(s.max(1e-3))
}

/// Result of one sender session, indexed by peer.
#[derive(Debug, Clone)]
pub struct SenderRun {
    pub peers: Vec<SocketAddr>,
    pub reachable: Vec<bool>,
    pub probes_sent: Vec<u32>,
    pub reports: Vec<Option<ReportFrame>>,
    /// `None` when no helper reported.
    pub estimate: Option<CapacityEstimate>,
    pub tab_bytes: u64,
    pub elapsed_s: f64,
}

enum Links {
    Udp {
        sock: UdpSocket,
        addrs: Vec<SocketAddr>,
    },
    Tcp(Vec<(TcpStream, StreamDecoder)>),
}

impl Links {
    fn send(&mut self, link: usize, bytes: &[u8]) -> io::Result<()> {
        match self {
            Links::Udp { sock, addrs } => match sock.send_to(bytes, addrs[link]) {
                Err(e) if e.kind() == ErrorKind::ConnectionRefused => Ok(()),
                r => r.map(drop),
            },
            Links::Tcp(streams) => streams[link].0.write_all(bytes),
        }
    }

    fn links(&self) -> usize {
        match self {
            Links::Udp { addrs, .. } => addrs.len(),
            Links::Tcp(s) => s.len(),
        }
    }

    /// Reads reports for up to `budget` seconds.
    fn collect(&mut self, session: &mut CapacitySession, budget: f64) -> io::Result<()> {
        let mut buf = [0u8; 2048];
        match self {
            Links::Udp { sock, addrs } => {
                sock.set_read_timeout(Some(secs(budget.min(0.05))))?;
                match sock.recv_from(&mut buf) {
                    Ok((len, from)) => {
                        let link = addrs
                            .iter()
                            .position(|&a| a == from)
                            .or_else(|| addrs.iter().position(|a| a.port() == from.port()));
                        if let (Ok(Frame::Report(r)), Some(i)) = (decode_datagram(&buf[..len]), link) {
                            session.on_report(i, r);
                        }
                        Ok(())
                    }
                    Err(e) if is_timeout(&e) || e.kind() == ErrorKind::ConnectionRefused => Ok(()),
                    Err(e) => Err(e),
                }
            }
            Links::Tcp(streams) => {
                let mut got = false;
                for (i, (stream, dec)) in streams.iter_mut().enumerate() {
                    stream.set_nonblocking(true)?;
                    let n = match stream.read(&mut buf) {
                        Ok(n) => n,
                        Err(e) if is_timeout(&e) => continue,
                        Err(_) => 0,
                    };
                    got |= n > 0;
                    for frame in dec.push(&buf[..n]) {
                        if let Ok(Frame::Report(r)) = frame {
                            session.on_report(i, r);
                        }
                    }
                }
                if !got {
                    sleep(secs(budget.min(0.005)));
                }
                Ok(())
            }
        }
    }
}

fn connect(peers: &[SocketAddr], p: &PeerArgs) -> Result<(Links, Vec<usize>)> {
    match p.transport {
        Transport::Udp => {
            let any: SocketAddr = if peers[0].is_ipv4() {
                "0.0.0.0:0".parse()?
            } else {
                "[::]:0".parse()?
            };
            let sock = UdpSocket::bind(any).context("cannot bind the sender socket")?;
            Ok((
                Links::Udp {
                    sock,
                    addrs: peers.to_vec(),
                },
                (0..peers.len()).collect(),
            ))
        }
        Transport::Tcp => {
            let mut streams = Vec::new();
            let mut index = Vec::new();
            for (i, addr) in peers.iter().enumerate() {
                match TcpStream::connect_timeout(addr, secs(p.connect_timeout)) {
                    Ok(s) => {
                        s.set_nodelay(true)?;
                        streams.push((s, StreamDecoder::new()));
                        index.push(i);
                    }
                    Err(e) => eprintln!("warning: {addr} unreachable: {e}"),
                }
            }
            Ok((Links::Tcp(streams), index))
        }
    }
}

/// One capacity test toward `p.peers`. Helpers that cannot be reached are
/// left out of the schedule but still count toward the required reports.
pub fn sender_session(
    p: &PeerArgs,
    packets: u32,
    size: u32,
    rate: Option<f64>,
    aggregation: &AggregationParams,
) -> Result<SenderRun> {
    if p.peers.is_empty() {
        bail!("--peers is required in the sender role");
    }
    if p.transport == Transport::Udp && size as usize > MAX_DATAGRAM {
        bail!("--size {size} does not fit in one datagram (max {MAX_DATAGRAM})");
    }
    if (size as usize) < PROBE_HEADER_LEN {
        bail!("--size must be at least the {PROBE_HEADER_LEN}-byte probe header");
    }
    let peers = p.peers.iter().map(|s| resolve(s)).collect::<Result<Vec<_>>>()?;
    let n = peers.len();
    let start = Instant::now();
    let (mut links, index) = connect(&peers, p)?;
    let mut out = SenderRun {
        reachable: (0..n).map(|i| index.contains(&i)).collect(),
        peers,
        probes_sent: vec![0; n],
        reports: vec![None; n],
        estimate: None,
        tab_bytes: 0,
        elapsed_s: 0.0,
    };
    if links.links() == 0 {
        out.elapsed_s = start.elapsed().as_secs_f64();
        return Ok(out);
    }
    let sender = SenderConfig {
        rate_limit: rate,
        ..SenderConfig::uniform(links.links(), packets, size)
    };
    let mut session = CapacitySession::new(SessionConfig {
        sender,
        aggregation: *aggregation,
        report_deadline: p.report_deadline,
    })?;
    let mut buf = Vec::with_capacity(size as usize);
    loop {
        let now = start.elapsed().as_secs_f64();
        match session.poll(now, 0) {
            SessionAction::Probe { helper, frame } => {
                buf.clear();
                encode_into(&Frame::Probe(frame), &mut buf)?;
                links
                    .send(helper, &buf)
                    .with_context(|| format!("sending to {}", out.peers[index[helper]]))?;
            }
            SessionAction::Complete(c) => {
                buf.clear();
                encode_into(&Frame::Completion(c), &mut buf)?;
                for link in 0..links.links() {
                    // A helper that hangs up early finalizes on its own.
                    let _ = links.send(link, &buf);
                }
            }
            SessionAction::WaitUntil(t) if session.is_probing() => sleep(secs(t - now)),
            SessionAction::WaitUntil(t) => links.collect(&mut session, t - now)?,
            SessionAction::Finished => break,
        }
    }
    for (link, &peer) in index.iter().enumerate() {
        out.probes_sent[peer] = session.engine().sent_per_helper()[link];
        out.reports[peer] = session.reports()[link];
    }
    let values: Vec<f64> = out.reports.iter().flatten().map(|r| r.uavg_bps as f64).collect();
    out.estimate = aggregate_reports(&values, aggregation, n).ok();
    out.tab_bytes = session.engine().tab();
    out.elapsed_s = start.elapsed().as_secs_f64();
    Ok(out)
}

fn run_sender(a: &EstimateArgs) -> Result<Outcome> {
    let agg = a.aggregation.params()?;
    let run = sender_session(&a.peer, a.packets, a.size, a.rate, &agg)?;
    let mut r = RunReport::new(&[
        "helper",
        "address",
        "reachable",
        "probes_sent",
        "report_Bps",
        "report_samples",
    ]);
    r.param("role", "sender")
        .param("transport", a.peer.transport.name())
        .param("peers", a.peer.peers.join(","))
        .param("packets", a.packets)
        .param("size_bytes", a.size)
        .param("rate_Bps", opt(a.rate))
        .param("report_deadline_s", a.peer.report_deadline);
    a.aggregation.describe(&mut r);
    for i in 0..run.peers.len() {
        r.row(vec![
            i.to_string(),
            run.peers[i].to_string(),
            run.reachable[i].to_string(),
            run.probes_sent[i].to_string(),
            opt(run.reports[i].map(|x| x.uavg_bps)),
            opt(run.reports[i].map(|x| x.sample_count)),
        ]);
    }
    let confident = run.estimate.as_ref().is_some_and(|e| e.confident);
    r.result("estimate_Bps", opt(run.estimate.as_ref().map(|e| e.value_bps)))
        .result("confident", confident)
        .result("reports_received", run.reports.iter().flatten().count())
        .result("required_reports", agg.required_reports(run.peers.len()))
        .result("tab_bytes", run.tab_bytes)
        .result("elapsed_s", run.elapsed_s);
    r.emit(a.output.as_deref())?;
    Ok(if confident {
        Outcome::Success
    } else {
        Outcome::NoEstimate
    })
}

struct HelperSession {
    source: Option<SocketAddr>,
    accepted: u64,
    samples: usize,
    discarded: u64,
    finalization: Finalization,
    by: &'static str,
}

impl HelperSession {
    fn new(engine: &HelperEngine, accepted: u64, source: Option<SocketAddr>, fin: Finalization, by: &'static str) -> Self {
        Self {
            source,
            accepted,
            samples: engine.samples().len(),
            discarded: engine.discarded(),
            finalization: fin,
            by,
        }
    }
}

fn announce(transport: Transport, addr: SocketAddr) {
    println!("# listening {} {addr}", transport.name());
    let _ = io::stdout().flush();
}

fn count_accepted(ev: &HelperEvent) -> u64 {
    matches!(ev, HelperEvent::Frame(Acceptance::Accepted { .. })) as u64
}

fn report_bytes(fin: Finalization) -> Option<Vec<u8>> {
    let Finalization::Report(r) = fin else {
        return None;
    };
    let mut buf = Vec::new();
    encode_into(&Frame::Report(r), &mut buf).ok()?;
    Some(buf)
}

/// Serves one UDP session. `None` when no probe arrived before `wait_until`.
fn udp_session(sock: &UdpSocket, params: FilterParams, start: Instant, wait_until: f64) -> Result<Option<HelperSession>> {
    let mut buf = vec![0u8; 1 << 16];
    let mut engine: Option<HelperEngine> = None;
    let mut source = None;
    let mut accepted = 0;
    let now = || start.elapsed().as_secs_f64();
    let (fin, by) = loop {
        let t = now();
        let deadline = engine
            .as_ref()
            .map_or(wait_until, |e| e.idle_deadline().expect("not finalized"));
        if t >= deadline {
            match engine.as_mut() {
                None => return Ok(None),
                Some(e) => break (e.on_tick(t).expect("idle deadline passed"), "idle"),
            }
        }
        sock.set_read_timeout(Some(secs(deadline - t)))?;
        let (len, from) = match sock.recv_from(&mut buf) {
            Ok(x) => x,
            Err(e) if is_timeout(&e) || e.kind() == ErrorKind::ConnectionRefused => continue,
            Err(e) => return Err(e.into()),
        };
        let t = now();
        let Ok(frame) = decode_datagram(&buf[..len]) else {
            continue;
        };
        if matches!(frame, Frame::Report(_)) {
            continue;
        }
        let e = engine.get_or_insert_with(|| HelperEngine::new(params, t));
        source = Some(from);
        match e.on_frame(&frame, t) {
            HelperEvent::Finalized(f) => break (f, "completion"),
            ev => accepted += count_accepted(&ev),
        }
    };
    if let (Some(bytes), Some(to)) = (report_bytes(fin), source) {
        sock.send_to(&bytes, to)?;
    }
    let e = engine.expect("finalized engines exist");
    Ok(Some(HelperSession::new(&e, accepted, source, fin, by)))
}

fn tcp_session(listener: &TcpListener, params: FilterParams, start: Instant, wait_until: f64) -> Result<Option<HelperSession>> {
    let now = || start.elapsed().as_secs_f64();
    let (mut stream, source) = loop {
        match listener.accept() {
            Ok(x) => break x,
            Err(e) if is_timeout(&e) => {
                if now() >= wait_until {
                    return Ok(None);
                }
                sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(e.into()),
        }
    };
    stream.set_nonblocking(false)?;
    let mut engine = HelperEngine::new(params, now());
    let mut decoder = StreamDecoder::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut accepted = 0;
    let (fin, by) = 'outer: loop {
        let t = now();
        let deadline = engine.idle_deadline().expect("not finalized");
        if t >= deadline {
            break (engine.on_tick(t).expect("idle deadline passed"), "idle");
        }
        stream.set_read_timeout(Some(secs(deadline - t)))?;
        let n = match stream.read(&mut buf) {
            Ok(n) => n,
            Err(e) if is_timeout(&e) => continue,
            Err(_) => 0,
        };
        if n == 0 {
            break (engine.on_completion().expect("not finalized"), "closed");
        }
        let t = now();
        for frame in decoder.push(&buf[..n]).into_iter().flatten() {
            match engine.on_frame(&frame, t) {
                HelperEvent::Finalized(f) => break 'outer (f, "completion"),
                ev => accepted += count_accepted(&ev),
            }
        }
    };
    if let Some(bytes) = report_bytes(fin) {
        // The sender may already have given up; nothing to do then.
        let _ = stream.write_all(&bytes).and_then(|_| stream.flush());
    }
    Ok(Some(HelperSession::new(&engine, accepted, Some(source), fin, by)))
}

fn run_helper(a: &EstimateArgs) -> Result<Outcome> {
    let params = a.filter.params()?;
    let bind = resolve(&a.bind)?;
    let start = Instant::now();
    let transport = a.peer.transport;
    let mut sessions = Vec::new();
    enum Listener {
        Udp(UdpSocket),
        Tcp(TcpListener),
    }
    let listener = match transport {
        Transport::Udp => {
            let s = UdpSocket::bind(bind).with_context(|| format!("cannot bind {bind}"))?;
            announce(transport, s.local_addr()?);
            Listener::Udp(s)
        }
        Transport::Tcp => {
            let l = TcpListener::bind(bind).with_context(|| format!("cannot bind {bind}"))?;
            l.set_nonblocking(true)?;
            announce(transport, l.local_addr()?);
            Listener::Tcp(l)
        }
    };
    while a.sessions == 0 || sessions.len() < a.sessions as usize {
        let wait_until = start.elapsed().as_secs_f64() + a.wait;
        let s = match &listener {
            Listener::Udp(s) => udp_session(s, params, start, wait_until)?,
            Listener::Tcp(l) => tcp_session(l, params, start, wait_until)?,
        };
        match s {
            Some(s) => sessions.push(s),
            None => break,
        }
    }

    let mut r = RunReport::new(&[
        "session",
        "source",
        "probes_accepted",
        "samples",
        "discarded",
        "report_Bps",
        "report_samples",
        "finalized_by",
    ]);
    r.param("role", "helper")
        .param("transport", transport.name())
        .param("bind", &a.bind)
        .param("sessions", a.sessions)
        .param("wait_s", a.wait);
    a.filter.describe(&mut r);
    for (i, s) in sessions.iter().enumerate() {
        let rep = match s.finalization {
            Finalization::Report(r) => Some(r),
            Finalization::NoReport => None,
        };
        r.row(vec![
            i.to_string(),
            opt(s.source),
            s.accepted.to_string(),
            s.samples.to_string(),
            s.discarded.to_string(),
            opt(rep.map(|x| x.uavg_bps)),
            opt(rep.map(|x| x.sample_count)),
            s.by.to_string(),
        ]);
    }
    let reported = sessions
        .iter()
        .filter(|s| matches!(s.finalization, Finalization::Report(_)))
        .count();
    r.result("sessions_served", sessions.len())
        .result("reports_sent", reported);
    r.emit(a.output.as_deref())?;
    Ok(if !sessions.is_empty() && reported == sessions.len() {
        Outcome::Success
    } else {
        Outcome::NoEstimate
    })
}
