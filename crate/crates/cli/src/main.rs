// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! `upbw`: upload-bandwidth estimation and ring allocation.
//!
//! Exit codes: 0 success or confident estimate, 1 usage or environment
//! error, 2 low-confidence or no estimate, 3 algorithm cross-check failure.

mod alloc;
mod args;
mod aub;
mod net;
mod report;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NoEstimate,
    Mismatch,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::NoEstimate => 2,
            Outcome::Mismatch => 3,
        }
    }
}

const AFTER_HELP: &str = "\
Reports are CSV with `#` comment lines: the command, then one `# param`
line per setting, the table, then `# result` lines and `# output` paths.
Column names carry units (_Bps bytes/second, _s seconds, _bytes).

Exit codes: 0 success/confident, 1 usage or environment error,
2 low-confidence or no estimate, 3 algorithm mismatch.";

#[derive(Debug, Parser)]
#[command(name = "upbw", version, about = "Upload bandwidth estimation with helper peers", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one capacity test in the network simulator.
    Simulate(simulate::SimulateArgs),
    /// Run a capacity test over real sockets, as sender or helper.
    Estimate(net::EstimateArgs),
    /// Search the available upload bandwidth, or check a rate with pings.
    Aub(aub::AubArgs),
    /// Solve a ring allocation instance.
    Alloc(alloc::AllocArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(&a),
        Command::Estimate(a) => net::run(&a),
        Command::Aub(a) => aub::run(&a),
        Command::Alloc(a) => alloc::run(&a),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
