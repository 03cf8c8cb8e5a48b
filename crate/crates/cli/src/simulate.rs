// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use upbw_core::netsim::{run_capacity_test, write_trace_csv};
use upbw_core::sender::{SendOrder, SenderConfig, SessionConfig};

use crate::args::{per_helper, AggregationArgs, FilterArgs, SimNetArgs};
use crate::report::{opt, RunReport};
use crate::Outcome;

/// Table columns: helper, ab_Bps, latency_s, probes_accepted, samples,
/// report_Bps, report_samples.
#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub net: SimNetArgs,
    /// Probes per helper; one value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "20")]
    pub packets: Vec<u32>,
    /// Probe frame size in bytes, header included; one value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "8192")]
    pub size: Vec<u32>,
    /// Seconds to wait for reports after the completion notice.
    #[arg(long, default_value_t = 10.0)]
    pub report_deadline: f64,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub aggregation: AggregationArgs,
    /// Write the event trace (time_s,event,helper,bytes,rtt_s) here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(a: &SimulateArgs) -> Result<Outcome> {
    let sim = a.net.config(a.trace.is_some())?;
    let n = a.net.helpers;
    let sender = SenderConfig {
        packets_per_helper: per_helper("packets", &a.packets, n)?,
        packet_size: per_helper("size", &a.size, n)?,
        send_order: SendOrder::RoundRobin,
        ..SenderConfig::uniform(n, 0, 0)
    };
    sender.validate()?;
    let session = SessionConfig {
        sender,
        aggregation: a.aggregation.params()?,
        report_deadline: a.report_deadline,
    };
    let filter = a.filter.params()?;
    let run = run_capacity_test(&sim, &session, &filter)?;

    let mut r = RunReport::new(&[
        "helper",
        "ab_Bps",
        "latency_s",
        "probes_accepted",
        "samples",
        "report_Bps",
        "report_samples",
    ]);
    a.net.describe(&mut r);
    r.param("packets", join(&session.sender.packets_per_helper))
        .param("size_bytes", join(&session.sender.packet_size))
        .param("report_deadline_s", a.report_deadline);
    a.filter.describe(&mut r);
    a.aggregation.describe(&mut r);
    for (i, path) in sim.paths.iter().enumerate() {
        let report = run.reports[i];
        r.row(vec![
            i.to_string(),
            path.ab_bps.to_string(),
            path.base_latency.to_string(),
            run.arrivals[i].len().to_string(),
            run.samples[i].len().to_string(),
            opt(report.map(|x| x.uavg_bps)),
            opt(report.map(|x| x.sample_count)),
        ]);
    }
    let estimate = run.outcome.as_ref().and_then(|o| o.as_ref().ok());
    r.result("estimate_Bps", opt(estimate.map(|e| e.value_bps)))
        .result("confident", run.is_confident())
        .result("reports_received", opt(estimate.map(|e| e.reports_received)))
        .result("sim_time_s", run.end_time)
        .result("events", run.events);
    if let Some(path) = &a.trace {
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        write_trace_csv(&run.trace, BufWriter::new(f))?;
        r.output(path);
    }
    r.emit(a.output.as_deref())?;
    Ok(if run.is_confident() {
        Outcome::Success
    } else {
        Outcome::NoEstimate
    })
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}
