// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Flag groups shared by several commands.

use anyhow::{bail, Context, Result};
use clap::Args;
use upbw_core::helper::FilterParams;
use upbw_core::netsim::{BackgroundFlow, PathConfig, SenderWindow, SimConfig};
use upbw_core::sender::AggregationParams;

use crate::report::RunReport;

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    /// Lower median factor of the sample filter.
    #[arg(long, default_value_t = 0.2)]
    pub p1: f64,
    /// Upper median factor of the sample filter.
    #[arg(long, default_value_t = 5.0)]
    pub p2: f64,
    /// Standard-deviation band of the trim rounds.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Trimming stops at this many samples.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Samples per sliding-window estimate.
    #[arg(long, default_value_t = 5)]
    pub min_p: usize,
    /// Helper idle timeout in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub idle_timeout: f64,
}

impl FilterArgs {
    pub fn params(&self) -> Result<FilterParams> {
        let p = FilterParams {
            p1: self.p1,
            p2: self.p2,
            q: self.q,
            k: self.k,
            min_p: self.min_p,
            idle_timeout: self.idle_timeout,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn describe(&self, r: &mut RunReport) {
        r.param("p1", self.p1)
            .param("p2", self.p2)
            .param("q", self.q)
            .param("k", self.k)
            .param("min_p", self.min_p)
            .param("idle_timeout_s", self.idle_timeout);
    }
}

#[derive(Debug, Clone, Args)]
pub struct AggregationArgs {
    /// Lower closeness factor around the median report.
    #[arg(long, default_value_t = 0.8)]
    pub p3: f64,
    /// Upper closeness factor around the median report.
    #[arg(long, default_value_t = 1.2)]
    pub p4: f64,
    /// Fraction of reports that must be close to the median.
    #[arg(long, default_value_t = 0.6)]
    pub pa: f64,
    /// Fraction of helpers that must report.
    #[arg(long, default_value_t = 0.6)]
    pub pb: f64,
}

impl AggregationArgs {
    pub fn params(&self) -> Result<AggregationParams> {
        let p = AggregationParams {
            p3: self.p3,
            p4: self.p4,
            pa: self.pa,
            pb: self.pb,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn describe(&self, r: &mut RunReport) {
        r.param("p3", self.p3)
            .param("p4", self.p4)
            .param("pa", self.pa)
            .param("pb", self.pb);
    }
}

/// Simulated network: the source link, one path per helper, cross traffic.
#[derive(Debug, Clone, Args)]
pub struct SimNetArgs {
    /// Source upload bandwidth (bytes/s).
    #[arg(long, default_value_t = 240_000.0)]
    pub sub: f64,
    /// Number of helpers.
    #[arg(long, default_value_t = 3)]
    pub helpers: usize,
    /// Path bandwidth per helper (bytes/s); one value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "100000")]
    pub ab: Vec<f64>,
    /// One-way path latency per helper (ms); one value applies to all.
    #[arg(long = "latency-ms", value_delimiter = ',', default_value = "20")]
    pub latency_ms: Vec<f64>,
    /// Upper bound of uniform extra path delay (ms).
    #[arg(long = "jitter-ms", value_delimiter = ',', default_value = "0")]
    pub jitter_ms: Vec<f64>,
    /// Probe loss probability per path.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub loss: Vec<f64>,
    /// Route every path through one shared bottleneck queue.
    #[arg(long)]
    pub shared_bottleneck: bool,
    /// Unaccounted cross traffic on the source link (bytes/s).
    #[arg(long, default_value_t = 0.0)]
    pub background: f64,
    /// Application traffic the sender accounts for (bytes/s).
    #[arg(long, default_value_t = 0.0)]
    pub app_rate: f64,
    /// Per-packet framing overhead on the link (bytes).
    #[arg(long, default_value_t = 0)]
    pub overhead: u64,
    /// Sender frames allowed on the link at once; 0 means unbounded.
    #[arg(long, default_value_t = 2)]
    pub window: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Expands a flag list to one value per helper.
pub fn per_helper<T: Copy>(flag: &str, values: &[T], n: usize) -> Result<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => bail!("--{flag} has {len} values; give 1 or one per helper ({n})"),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl SimNetArgs {
    pub fn config(&self, record_trace: bool) -> Result<SimConfig> {
        let n = self.helpers;
        if n == 0 {
            bail!("--helpers must be at least 1");
        }
        let ab = per_helper("ab", &self.ab, n)?;
        let lat = per_helper("latency-ms", &self.latency_ms, n)?;
        let jit = per_helper("jitter-ms", &self.jitter_ms, n)?;
        let loss = per_helper("loss", &self.loss, n)?;
        let paths = (0..n)
            .map(|i| PathConfig {
                ab_bps: ab[i],
                base_latency: lat[i] / 1e3,
                jitter: jit[i] / 1e3,
                loss_prob: loss[i],
                shared_bottleneck_group: self.shared_bottleneck.then_some(0),
            })
            .collect();
        let mut cfg = SimConfig::new(self.sub, paths);
        for (rate, accounted) in [(self.background, false), (self.app_rate, true)] {
            if rate < 0.0 {
                bail!("traffic rates must be non-negative, got {rate}");
            }
            if rate > 0.0 {
                cfg.background_flows.push(BackgroundFlow {
                    rate_bps: rate,
                    start: 0.0,
                    end: f64::INFINITY,
                    accounted,
                });
            }
        }
        cfg.link_overhead_bytes = self.overhead;
        cfg.sender_window = match self.window {
            0 => SenderWindow::Unbounded,
            w => SenderWindow::Frames(w),
        };
        cfg.seed = self.seed;
        cfg.record_trace = record_trace;
        cfg.validate().context("invalid network")?;
        Ok(cfg)
    }

    pub fn describe(&self, r: &mut RunReport) {
        r.param("sub_Bps", self.sub)
            .param("helpers", self.helpers)
            .param("ab_Bps", join(&self.ab))
            .param("latency_ms", join(&self.latency_ms))
            .param("jitter_ms", join(&self.jitter_ms))
            .param("loss", join(&self.loss))
            .param("shared_bottleneck", self.shared_bottleneck)
            .param("background_Bps", self.background)
            .param("app_rate_Bps", self.app_rate)
            .param("overhead_bytes", self.overhead)
            .param("window_frames", self.window)
            .param("seed", self.seed);
    }
}
