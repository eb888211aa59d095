use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::experiment::DetectionReport;
use super::sweep::SweepTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Flat per-point summary; the CSV form of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub point: String,
    pub detector: String,
    pub entropy: f64,
    pub log_branching: Option<f64>,
    pub margin: Option<f64>,
    pub trials: u64,
    pub threshold: f64,
    pub type_i: f64,
    pub type_i_lo: f64,
    pub type_i_hi: f64,
    pub type_ii: f64,
    pub type_ii_lo: f64,
    pub type_ii_hi: f64,
    pub power: f64,
}

impl SummaryRow {
    fn new(point: &str, entropy: f64, log_br: Option<f64>, r: &DetectionReport) -> Self {
        Self {
            point: point.into(),
            detector: r.detector.clone(),
            entropy,
            log_branching: log_br,
            margin: log_br.map(|lb| entropy - lb),
            trials: r.null_arm.trials,
            threshold: r.threshold,
            type_i: r.type_i,
            type_i_lo: r.type_i_ci.lo,
            type_i_hi: r.type_i_ci.hi,
            type_ii: r.type_ii,
            type_ii_lo: r.type_ii_ci.lo,
            type_ii_hi: r.type_ii_ci.hi,
            power: r.power(),
        }
    }
}

/// Anything `emit_report` can write.
pub trait Report: Serialize {
    fn summary_rows(&self) -> Vec<SummaryRow>;
}

impl Report for DetectionReport {
    fn summary_rows(&self) -> Vec<SummaryRow> {
        vec![SummaryRow::new("base", self.config.pair.relative_entropy(), None, self)]
    }
}

impl Report for SweepTable {
    fn summary_rows(&self) -> Vec<SummaryRow> {
        self.rows
            .iter()
            .map(|r| SummaryRow::new(&r.point, r.entropy, r.log_branching, &r.report))
            .collect()
    }
}

/// JSON writes the whole report as one object; CSV writes one summary row
/// per point under a header. Empty reports are refused before the file is
/// created.
pub fn emit_report<R: Report>(report: &R, format: ReportFormat, path: &Path) -> Result<()> {
    let rows = report.summary_rows();
    if rows.is_empty() {
        return Err(Error::Config("nothing to report: the sweep is empty".into()));
    }
    match format {
        ReportFormat::Json => {
            let text = serde_json::to_string_pretty(report)?;
            std::fs::write(path, text + "\n")?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
            for row in rows {
                w.serialize(row).map_err(csv_error)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Writes to a string instead of a file.
pub fn render_report<R: Report>(report: &R, format: ReportFormat) -> Result<String> {
    let rows = report.summary_rows();
    if rows.is_empty() {
        return Err(Error::Config("nothing to report: the sweep is empty".into()));
    }
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(csv_error)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
        }
    }
}

pub fn read_report_json<R: DeserializeOwned>(path: &Path) -> Result<R> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("{other:?}")),
        }
    } else {
        Error::Format(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_threshold_sweep, ExperimentConfig, SweepSpec};

    fn table() -> SweepTable {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
seed = 9
trials = 10
[pair]
mu = [0.25, 0.25, 0.25, 0.25]
nu = [0.7, 0.1, 0.1, 0.1]
[domain]
kind = "tree"
generator = { kind = "b-ary", b = 2, depth = 5 }
[detector]
kind = "treecut"
cuts = { kind = "levels", from = 1, to = 5 }
"#,
        )
        .unwrap();
        let values = vec![vec![0.4, 0.2, 0.2, 0.2], vec![0.7, 0.1, 0.1, 0.1], vec![0.97, 0.01, 0.01, 0.01]];
        run_threshold_sweep(&cfg, &SweepSpec::Nu { values }).unwrap()
    }

    #[test]
    fn json_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = table();
        let j = dir.path().join("r.json");
        emit_report(&t, ReportFormat::Json, &j).unwrap();
        let back: SweepTable = read_report_json(&j).unwrap();
        assert_eq!(back, t);
        let c = dir.path().join("r.csv");
        emit_report(&t, ReportFormat::Csv, &c).unwrap();
        let rows = read_summary_csv(&c).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows, t.summary_rows());
        assert!(std::fs::read_to_string(&c).unwrap().starts_with("point,detector,entropy"));
    }

    #[test]
    fn empty_table_creates_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.csv");
        let t = SweepTable {
            rows: vec![],
            warnings: vec![],
        };
        assert!(emit_report(&t, ReportFormat::Csv, &p).is_err());
        assert!(!p.exists());
    }
}
