//! CSV tables and run manifests.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::config::RunConfig;

/// Formats `x` with 12 significant digits, `%g` style: fixed notation for
/// decimal exponents in `[-5, 12)`, scientific otherwise, trailing zeros
/// dropped.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(fmt_float).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()
    }
}

/// Record of a successful run, written in config syntax so that it can be
/// passed back with `--config`.
#[derive(Debug, Clone)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub seed: Option<u64>,
    pub duration: Duration,
    pub outputs: &'a [PathBuf],
}

impl RunManifest<'_> {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("#! command = {}\n", self.command));
        s.push_str(&format!("#! version = {}\n", env!("CARGO_PKG_VERSION")));
        if let Some(seed) = self.seed {
            s.push_str(&format!("#! seed = {seed}\n"));
        }
        s.push_str(&format!("#! duration_s = {:.6}\n", self.duration.as_secs_f64()));
        let outputs: Vec<String> = self.outputs.iter().map(|p| p.display().to_string()).collect();
        s.push_str(&format!("#! outputs = {}\n", outputs.join(", ")));
        s.push_str(&self.config.to_string());
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.render())
    }
}
