//! Report types and the JSON / CSV writers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Comparator, HistogramBin, MetricEstimate, Tolerance};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub metric: String,
    pub comparator: Comparator,
    pub bound: f64,
    pub tolerance: Tolerance,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub trials_requested: u64,
    pub trials_run: u64,
    pub metrics: BTreeMap<String, MetricEstimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub histogram: Vec<HistogramBin>,
    pub assertions: Vec<AssertionOutcome>,
    pub wall_clock_s: f64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiments: Vec<ExperimentReport>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.experiments.iter().all(ExperimentReport::passed)
    }

    /// The report as JSON with wall-clock times zeroed: the part that must
    /// reproduce exactly under the same seeds.
    pub fn payload(&self) -> String {
        let mut r = self.clone();
        r.experiments.iter_mut().for_each(|e| e.wall_clock_s = 0.0);
        serde_json::to_string(&r).expect("reports serialize")
    }
}

pub fn write_report<W: Write + ?Sized>(report: &Report, w: &mut W, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *w, report)?;
            writeln!(w).map_err(|e| Error::io("<report>", e))
        }
        ReportFormat::Csv => {
            let mut c = csv::Writer::from_writer(w);
            let row_err = |e: csv::Error| Error::Internal(format!("csv: {e}"));
            c.write_record(["experiment", "metric", "estimate", "ci_lo", "ci_hi", "bound", "pass"]).map_err(row_err)?;
            for e in &report.experiments {
                for a in &e.assertions {
                    c.write_record([
                        e.name.clone(),
                        a.metric.clone(),
                        a.estimate.to_string(),
                        a.ci_lo.to_string(),
                        a.ci_hi.to_string(),
                        a.bound.to_string(),
                        a.pass.to_string(),
                    ])
                    .map_err(row_err)?;
                }
            }
            c.flush().map_err(|e| Error::io("<report>", e))
        }
    }
}

pub fn emit_report(report: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_report(report, &mut w, format).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSON report.
pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{bundled, run_battery, RunOptions};

    fn small() -> Report {
        let mut specs = bundled("attack2-data").unwrap();
        specs[0].trials = 200;
        run_battery(&specs, &RunOptions::default()).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        let r = small();
        emit_report(&r, &p, ReportFormat::Json).unwrap();
        assert_eq!(read_report(&p).unwrap(), r);
        let empty = Report::default();
        emit_report(&empty, &p, ReportFormat::Json).unwrap();
        assert_eq!(read_report(&p).unwrap(), empty);
    }

    #[test]
    fn csv_has_one_row_per_assertion() {
        let mut buf = Vec::new();
        write_report(&small(), &mut buf, ReportFormat::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "experiment,metric,estimate,ci_lo,ci_hi,bound,pass");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("attack2-data,detection,"));
    }

    #[test]
    fn missing_directory_names_the_path() {
        let err = emit_report(&Report::default(), Path::new("/nonexistent/dir/r.json"), ReportFormat::Json).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/r.json"));
    }
}
