// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Command echo, parameters, a CSV table, results and output paths, always
/// written in that order.
#[derive(Debug, Default)]
pub struct RunReport {
    params: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    results: Vec<(String, String)>,
    outputs: Vec<PathBuf>,
}

impl RunReport {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn param(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.params.push((key.into(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn result(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.results.push((key.into(), value.to_string()));
        self
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let argv: Vec<String> = std::env::args().skip(1).collect();
        writeln!(out, "# command: upbw {}", argv.join(" "))?;
        for (k, v) in &self.params {
            writeln!(out, "# param {k}={v}")?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        for (k, v) in &self.results {
            writeln!(out, "# result {k}={v}")?;
        }
        for p in &self.outputs {
            writeln!(out, "# output {}", p.display())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes to `path`, or to stdout when no path is given.
    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => {
                let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
                self.write_to(BufWriter::new(f))
            }
            None => self.write_to(io::stdout().lock()),
        }
    }
}

/// Empty cell for a missing value.
pub fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
