//! Output directory handling. All files are written from the main thread.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rsfw::solver::RunTrace;
use serde::Serialize;

use crate::error::CliError;

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Builds a CSV body from a header and rows of already formatted cells.
pub fn csv_table<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Shortest round-trip representation, so values reload exactly.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Per-iteration mean and standard deviation of `f`, plus mean wall time when recorded.
pub struct Aggregate {
    pub k: Vec<usize>,
    pub mean_f: Vec<f64>,
    pub std_f: Vec<f64>,
    pub mean_elapsed_s: Option<Vec<f64>>,
}

impl Aggregate {
    pub fn of(traces: &[RunTrace], timing: bool) -> Self {
        let rows = rsfw::solver::aggregate_objective(traces);
        let mean_elapsed_s = (timing && !traces.is_empty()).then(|| {
            rows.iter()
                .map(|&(k, _, _)| {
                    let total: f64 = traces
                        .iter()
                        .map(|t| match t.records.get(k) {
                            Some(r) => r.elapsed_ns as f64,
                            None => t.summary.wall_ns as f64,
                        })
                        .sum();
                    total / traces.len() as f64 * 1e-9
                })
                .collect()
        });
        Self {
            k: rows.iter().map(|r| r.0).collect(),
            mean_f: rows.iter().map(|r| r.1).collect(),
            std_f: rows.iter().map(|r| r.2).collect(),
            mean_elapsed_s,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,mean_f,std_f\n");
        for i in 0..self.k.len() {
            writeln!(out, "{},{},{}", self.k[i], num(self.mean_f[i]), num(self.std_f[i])).unwrap();
        }
        out
    }
}
