//! Bit-stable report files. CSV floats use 17 significant digits, LF line
//! endings and RFC 4180 quoting; JSON keys are sorted. Wall times go to a
//! separate file so that reports depend only on the config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{validity_check, ConvergenceRun, ConvergenceTable, ExperimentConfig, Validity};
use crate::error::{Error, Result};
use crate::modulus::ModulusProfile;
use crate::numeric::GENERATOR_NAME;
use crate::tail::TailPoint;

pub const TABLE_FILE: &str = "table.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub generator: String,
    pub table: ConvergenceTable,
    pub validity: Validity,
}

impl Report {
    pub fn new(cfg: &ExperimentConfig, table: ConvergenceTable) -> Self {
        Self {
            config: cfg.to_json_value(),
            seed: cfg.seeds.root,
            version: env!("CARGO_PKG_VERSION").to_string(),
            generator: GENERATOR_NAME.to_string(),
            validity: validity_check(&table),
            table,
        }
    }

    pub fn to_json(&self) -> String {
        // serde_json's default map is ordered, so keys come out sorted
        let v = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad report: {e}")))
    }
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// CSV text from a header and rows of already-formatted fields.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.iter().map(|h| quote(h)).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|f| quote(f)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn table_csv(table: &ConvergenceTable) -> String {
    let header = [
        "n",
        "empirical_delta",
        "error_radius",
        "argmax_x",
        "lower_bracket",
        "upper_bracket",
        "estimate",
        "closed_form",
        "lower_ratio",
    ];
    csv_text(
        &header,
        table.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_float(r.empirical_delta),
                fmt_float(r.error_radius),
                fmt_float(r.argmax_x),
                fmt_float(r.lower_bracket),
                fmt_float(r.upper_bracket),
                fmt_float(r.estimate),
                fmt_opt(r.closed_form),
                fmt_opt(r.lower_ratio),
            ]
        }),
    )
}

pub fn profile_csv(p: &ModulusProfile) -> String {
    csv_text(
        &["delta", "omega", "slack"],
        p.deltas.iter().zip(&p.values).map(|(d, v)| vec![fmt_float(*d), fmt_float(*v), fmt_float(p.enclosure_slack)]),
    )
}

pub fn tail_csv(points: &[TailPoint]) -> String {
    csv_text(
        &["u", "value", "half_width"],
        points.iter().map(|p| vec![fmt_float(p.u), fmt_float(p.value), fmt_float(p.half_width)]),
    )
}

pub fn timings_csv(run: &ConvergenceRun) -> String {
    let mut s = String::from("n,wall_seconds\n");
    for (n, t) in &run.wall_times {
        let _ = writeln!(s, "{n},{}", fmt_float(*t));
    }
    s
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
        }
    }
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn write_report(report: &Report, format: Format, destination: &Path) -> Result<()> {
    match format {
        Format::Csv => write_file(destination, &table_csv(&report.table)),
        Format::Json => write_file(destination, &report.to_json()),
    }
}

/// Writes `table.csv`, `report.json` (either, when `only` is given) and
/// `timings.csv` into `dir`; returns the written paths.
pub fn write_run(cfg: &ExperimentConfig, run: &ConvergenceRun, dir: &Path, only: Option<Format>) -> Result<(Report, Vec<PathBuf>)> {
    let report = Report::new(cfg, run.table.clone());
    let mut written = Vec::new();
    for (fmt, name) in [(Format::Csv, TABLE_FILE), (Format::Json, REPORT_FILE)] {
        if only.is_none() || only == Some(fmt) {
            let p = dir.join(name);
            write_report(&report, fmt, &p)?;
            written.push(p);
        }
    }
    let p = dir.join(TIMINGS_FILE);
    write_file(&p, &timings_csv(run))?;
    written.push(p);
    Ok((report, written))
}
