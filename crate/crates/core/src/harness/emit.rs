//! CSV tables and JSON run summaries.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Experiment, ExperimentConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// A named pass/fail outcome against a configured criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// A particle number left out of a run, with the reason.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub n: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub table: Table,
    pub checks: Vec<Check>,
    pub skipped: Vec<Skipped>,
    /// Experiment-specific results (fits, derived constants).
    pub results: serde_json::Value,
}

impl Report {
    pub fn new(config: &ExperimentConfig, table: Table) -> Self {
        Self {
            experiment: config.experiment,
            config: config.clone(),
            table,
            checks: Vec::new(),
            skipped: Vec::new(),
            results: serde_json::Value::Object(Default::default()),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary_json(&self) -> Result<String> {
        let summary = serde_json::json!({
            "experiment": self.experiment,
            "version": env!("CARGO_PKG_VERSION"),
            "rng": super::RNG_NAME,
            "seed": self.config.seed,
            "config": self.config,
            "checks": self.checks,
            "passed": self.passed(),
            "skipped": self.skipped,
            "results": self.results,
            "rows": self.table.rows.len(),
        });
        let mut s = serde_json::to_string_pretty(&summary).map_err(|e| Error::Consistency(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Emitted {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

/// Write the table as `csv` bytes.
pub fn csv_bytes(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Consistency(format!("csv encoding: {e}"));
    w.write_record(&table.header).map_err(err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Consistency(format!("csv encoding: {e}")))
}

/// Write `<experiment>.csv` and `<experiment>.summary.json` into `dir`.
pub fn emit(report: &Report, dir: &Path) -> Result<Emitted> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = report.experiment.name();
    let csv = dir.join(format!("{name}.csv"));
    let summary = dir.join(format!("{name}.summary.json"));
    std::fs::write(&csv, csv_bytes(&report.table)?).map_err(|e| Error::io(&csv, e))?;
    std::fs::write(&summary, report.summary_json()?).map_err(|e| Error::io(&summary, e))?;
    Ok(Emitted { csv, summary })
}
