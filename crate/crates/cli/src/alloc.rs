// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use upbw_core::alloc::{
    greedy_algo, parse_list, rsum_closed_form, rsum_max, rsum_naive, rsum_sweep,
    AllocationInstance,
};

use crate::report::RunReport;
use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Naive,
    Sweep,
    Closed,
    All,
}

/// Without `--x`, prints the rsum table with columns x plus one
/// rsum_<algorithm>_units column per algorithm. With `--x`, prints the
/// greedy allocation: node, s_units, p_units, own_units, next_units.
#[derive(Debug, Args)]
pub struct AllocArgs {
    /// Instance file with an `S:` line and a `P:` line.
    #[arg(long, conflicts_with_all = ["s", "p"])]
    pub file: Option<PathBuf>,
    /// Provider capacities, comma or space separated.
    #[arg(long, requires = "p")]
    pub s: Option<String>,
    /// Consumer capacities, comma or space separated.
    #[arg(long, requires = "s")]
    pub p: Option<String>,
    #[arg(long, value_enum, default_value = "all")]
    pub algorithm: Algorithm,
    /// Units from provider 0 to consumer 0.
    #[arg(long)]
    pub x: Option<i64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn load(a: &AllocArgs) -> Result<AllocationInstance> {
    let inst = match (&a.file, &a.s, &a.p) {
        (Some(path), _, _) => std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?
            .parse()?,
        (None, Some(s), Some(p)) => {
            let s = parse_list(s).map_err(anyhow::Error::msg).context("--s")?;
            let p = parse_list(p).map_err(anyhow::Error::msg).context("--p")?;
            AllocationInstance::new(s, p)?
        }
        _ => bail!("give an instance with --file or with --s and --p"),
    };
    Ok(inst)
}

fn join(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
}

pub fn run(a: &AllocArgs) -> Result<Outcome> {
    let inst = load(a)?;
    if let Some(x) = a.x {
        let res = greedy_algo(&inst, x)?;
        let mut r = RunReport::new(&["node", "s_units", "p_units", "own_units", "next_units"]);
        r.param("s_units", join(inst.s()))
            .param("p_units", join(inst.p()))
            .param("x_units", x);
        for i in 0..inst.n() {
            r.row(vec![
                i.to_string(),
                inst.s()[i].to_string(),
                inst.p()[i].to_string(),
                res.own[i].to_string(),
                res.next[i].to_string(),
            ]);
        }
        r.result("total_units", res.total);
        r.emit(a.output.as_deref())?;
        return Ok(Outcome::Success);
    }

    let wanted: &[Algorithm] = match a.algorithm {
        Algorithm::All => &[Algorithm::Naive, Algorithm::Sweep, Algorithm::Closed],
        ref one => std::slice::from_ref(one),
    };
    let profile = rsum_closed_form(&inst);
    let mut columns = Vec::new();
    for alg in wanted {
        let (name, table) = match alg {
            Algorithm::Naive => ("rsum_naive_units", rsum_naive(&inst)),
            Algorithm::Sweep => ("rsum_sweep_units", rsum_sweep(&inst)?),
            Algorithm::Closed => ("rsum_closed_units", profile.expand()),
            Algorithm::All => unreachable!(),
        };
        columns.push((name, table));
    }
    let mut header = vec!["x_units"];
    header.extend(columns.iter().map(|c| c.0));
    let mut r = RunReport::new(&header);
    r.param("s_units", join(inst.s()))
        .param("p_units", join(inst.p()))
        .param("algorithm", format!("{:?}", a.algorithm).to_lowercase());
    for x in 0..=inst.xmax() {
        let mut row = vec![x.to_string()];
        row.extend(columns.iter().map(|c| c.1[x as usize].to_string()));
        r.row(row);
    }
    let agree = columns.windows(2).all(|w| w[0].1 == w[1].1);
    let (argmax, max) = rsum_max(&inst);
    r.result("x1_units", profile.x1)
        .result("x2_units", profile.x2)
        .result("d1_units", profile.d1)
        .result("d2_units", profile.d2)
        .result("argmax_x_units", argmax)
        .result("max_units", max)
        .result("agree", agree);
    r.emit(a.output.as_deref())?;
    if agree {
        Ok(Outcome::Success)
    } else {
        eprintln!("error: rsum tables disagree");
        Ok(Outcome::Mismatch)
    }
}
