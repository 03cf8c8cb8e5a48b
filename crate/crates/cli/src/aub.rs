// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use upbw_core::netsim::{ping_probe_run, SimRateProbe};
use upbw_core::sender::{
    aub_search, AubSearchParams, PingProbeParams, SenderConfig, SessionConfig,
};

use crate::args::{AggregationArgs, FilterArgs, SimNetArgs};
use crate::net::{sender_session, PeerArgs};
use crate::report::{opt, RunReport};
use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AubMode {
    Search,
    Ping,
}

/// Search mode table columns: step, rate_Bps, measured_Bps, passed.
/// Ping mode table columns: sent_at_s, rtt_s (empty on timeout).
///
/// The simulator is used unless --peers is given. Over real sockets only
/// search mode is available, against helpers started with `--sessions 0`.
#[derive(Debug, Args)]
pub struct AubArgs {
    #[arg(long, value_enum, default_value = "search")]
    pub mode: AubMode,
    #[command(flatten)]
    pub net: SimNetArgs,
    #[command(flatten)]
    pub peer: PeerArgs,
    /// Acceptance ratio: a rate R passes when U(R) >= cr * R.
    #[arg(long, default_value_t = 0.9)]
    pub cr: f64,
    /// First rate of the search (bytes/s).
    #[arg(long, default_value_t = 25_000.0)]
    pub r0: f64,
    /// Bisection stops at this bracket width (bytes/s).
    #[arg(long, default_value_t = 2_000.0)]
    pub resolution: f64,
    /// Seconds per probed rate (search) or test length (ping). Defaults to
    /// 20 for search and 600 for ping.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Probe frame size in bytes. Defaults to 16384 for search and 1024
    /// for ping.
    #[arg(long)]
    pub size: Option<u32>,
    /// Upload rate during a ping test (bytes/s); 0 pings an idle link.
    #[arg(long, default_value_t = 25_600.0)]
    pub rate: f64,
    /// Seconds between pings.
    #[arg(long, default_value_t = 1.0)]
    pub interval: f64,
    /// RTTs at or below this count as good (s).
    #[arg(long, default_value_t = 0.5)]
    pub rtt_threshold: f64,
    /// RTTs above this are timeouts (s).
    #[arg(long, default_value_t = 20.0)]
    pub ping_timeout: f64,
    /// Required fraction of good pings.
    #[arg(long, default_value_t = 0.9)]
    pub quality: f64,
    /// Longest tolerated run of timeouts.
    #[arg(long, default_value_t = 3)]
    pub max_timeout_run: usize,
    /// Landmark base RTTs (ms).
    #[arg(long = "landmarks-ms", value_delimiter = ',', default_value = "30")]
    pub landmarks_ms: Vec<f64>,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub aggregation: AggregationArgs,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(a: &AubArgs) -> Result<Outcome> {
    match a.mode {
        AubMode::Search => search(a),
        AubMode::Ping => ping(a),
    }
}

fn search(a: &AubArgs) -> Result<Outcome> {
    let params = AubSearchParams {
        cr: a.cr,
        r0: a.r0,
        resolution: a.resolution,
        per_rate_duration: a.duration.unwrap_or(20.0),
        ..Default::default()
    };
    params.validate()?;
    let size = a.size.unwrap_or(16_384);
    let filter = a.filter.params()?;
    let aggregation = a.aggregation.params()?;
    let mut r = RunReport::new(&["step", "rate_Bps", "measured_Bps", "passed"]);
    r.param("mode", "search")
        .param("cr", a.cr)
        .param("r0_Bps", a.r0)
        .param("resolution_Bps", a.resolution)
        .param("duration_s", params.per_rate_duration)
        .param("size_bytes", size);

    let result = if a.peer.peers.is_empty() {
        a.net.describe(&mut r);
        let sim = a.net.config(false)?;
        let sender = SenderConfig::uniform(a.net.helpers, 2, size);
        sender.validate()?;
        let mut probe = SimRateProbe {
            sim,
            session: SessionConfig {
                aggregation,
                ..SessionConfig::new(sender)
            },
            filter,
        };
        aub_search(&params, &mut probe)?
    } else {
        r.param("transport", format!("{:?}", a.peer.transport).to_lowercase())
            .param("peers", a.peer.peers.join(","));
        let n = a.peer.peers.len() as f64;
        let mut probe = |rate: f64, duration: f64| -> Result<f64> {
            let packets = ((rate * duration) / (n * size as f64)).ceil().max(2.0) as u32;
            let run = sender_session(&a.peer, packets, size, Some(rate), &aggregation)?;
            Ok(run.estimate.map_or(0.0, |e| e.value_bps))
        };
        aub_search(&params, &mut probe).map_err(|e| anyhow::anyhow!("{e}"))?
    };
    a.filter.describe(&mut r);
    a.aggregation.describe(&mut r);
    for (i, s) in result.ladder.iter().enumerate() {
        r.row(vec![
            i.to_string(),
            s.rate.to_string(),
            s.measured.to_string(),
            s.passed.to_string(),
        ]);
    }
    r.result("aub_estimate_Bps", opt(result.estimate_bps))
        .result("largest_passing_rate_Bps", opt(result.largest_passing_rate));
    r.emit(a.output.as_deref())?;
    Ok(if result.estimate_bps.is_some() {
        Outcome::Success
    } else {
        Outcome::NoEstimate
    })
}

fn ping(a: &AubArgs) -> Result<Outcome> {
    if !a.peer.peers.is_empty() {
        bail!("ping mode runs in the simulator only; drop --peers");
    }
    let params = PingProbeParams {
        rate: a.rate,
        duration: a.duration.unwrap_or(600.0),
        ping_interval: a.interval,
        rtt_threshold: a.rtt_threshold,
        ping_timeout: a.ping_timeout,
        quality_fraction: a.quality,
        max_timeout_run: a.max_timeout_run,
        ..Default::default()
    };
    params.validate()?;
    let size = a.size.unwrap_or(1_024);
    let sim = a.net.config(false)?;
    let landmarks: Vec<f64> = a.landmarks_ms.iter().map(|ms| ms / 1e3).collect();
    let stats = ping_probe_run(&sim, &params, &landmarks, size)?;

    let mut r = RunReport::new(&["sent_at_s", "rtt_s"]);
    r.param("mode", "ping")
        .param("rate_Bps", a.rate)
        .param("duration_s", params.duration)
        .param("interval_s", a.interval)
        .param("rtt_threshold_s", a.rtt_threshold)
        .param("ping_timeout_s", a.ping_timeout)
        .param("quality", a.quality)
        .param("max_timeout_run", a.max_timeout_run)
        .param("landmarks_ms", a.landmarks_ms.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
        .param("size_bytes", size);
    a.net.describe(&mut r);
    for s in &stats.samples {
        r.row(vec![s.sent_at.to_string(), opt(s.rtt)]);
    }
    r.result("pings", stats.samples.len())
        .result("timeouts", stats.timeouts)
        .result("below_threshold_fraction", stats.below_threshold_fraction)
        .result("median_rtt_s", opt(stats.median_rtt))
        .result("longest_timeout_run", stats.longest_timeout_run)
        .result("quality", stats.quality);
    r.emit(a.output.as_deref())?;
    // A failed quality check is a valid answer, not an error.
    Ok(Outcome::Success)
}
