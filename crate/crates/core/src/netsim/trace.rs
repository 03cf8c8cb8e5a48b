// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Enqueue,
    LinkDone,
    Delivery,
    Loss,
    Report,
    Ping,
    PingTimeout,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Enqueue => "enqueue",
            TraceKind::LinkDone => "link-done",
            TraceKind::Delivery => "path-delivery",
            TraceKind::Loss => "loss",
            TraceKind::Report => "report",
            TraceKind::Ping => "ping",
            TraceKind::PingTimeout => "ping-timeout",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub kind: TraceKind,
    pub helper: Option<usize>,
    pub bytes: Option<u64>,
    pub rtt: Option<f64>,
}

pub const TRACE_HEADER: &str = "time_s,event,helper,bytes,rtt_s";

/// Writes the trace as CSV with the [`TRACE_HEADER`] columns. Missing
/// fields are left empty.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        write!(out, "{},{},", r.time, r.kind)?;
        if let Some(h) = r.helper {
            write!(out, "{h}")?;
        }
        out.write_all(b",")?;
        if let Some(b) = r.bytes {
            write!(out, "{b}")?;
        }
        out.write_all(b",")?;
        if let Some(rtt) = r.rtt {
            write!(out, "{rtt}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}
