//! Experiment results: PASS/FAIL criteria, numeric tables and their files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{LabError, Result};

/// One checked statement with its measured value.
#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub id: String,
    pub description: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

impl Criterion {
    pub fn new(id: &str, description: impl Into<String>, value: f64, threshold: impl Into<String>, pass: bool) -> Self {
        Criterion {
            id: id.to_string(),
            description: description.into(),
            value,
            threshold: threshold.into(),
            pass: pass && !value.is_nan(),
        }
    }

    /// `value <= bound`.
    pub fn at_most(id: &str, description: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(id, description, value, format!("<= {bound:e}"), value <= bound)
    }

    /// `value >= bound`.
    pub fn at_least(id: &str, description: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(id, description, value, format!(">= {bound}"), value >= bound)
    }

    /// `|value - target| <= tol`.
    pub fn near(id: &str, description: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::new(
            id,
            description,
            value,
            format!("{target} +- {tol:e}"),
            (value - target).abs() <= tol,
        )
    }

    pub fn line(&self) -> String {
        format!(
            "{} [{}] {}: {:.6e} (want {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.description,
            self.value,
            self.threshold
        )
    }
}

/// Plot-ready numeric table.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub criteria: Vec<Criterion>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    /// Fitted orders, limits and other scalars worth keeping.
    pub fits: serde_json::Map<String, serde_json::Value>,
    pub elapsed_seconds: f64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn fit(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.fits.insert(key.to_string(), v);
    }
}

/// Seventeen significant digits, '.' decimal separator.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Internal(format!("{}: {e}", path.display()))
}

/// Writes `<name>.json` and one `<name>-<table>.csv` per table. The CSV
/// bodies depend only on the numbers and the seed.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();
    for table in &report.tables {
        let path = dir.join(format!("{}-{}.csv", report.name, table.name));
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
        let mut header = vec!["seed".to_string()];
        header.extend(table.columns.iter().cloned());
        w.write_record(&header).map_err(|e| io_error(&path, e))?;
        for row in &table.rows {
            let mut rec = vec![report.seed.to_string()];
            rec.extend(row.iter().map(|v| format_number(*v)));
            w.write_record(&rec).map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
        written.push(path);
    }
    let path = dir.join(format!("{}.json", report.name));
    let summary = serde_json::json!({
        "name": report.name,
        "kind": report.kind,
        "seed": report.seed,
        "status": if report.passed() { "PASS" } else { "FAIL" },
        "criteria": report.criteria,
        "fits": report.fits,
        "tables": report.tables.iter().map(|t| format!("{}-{}.csv", report.name, t.name)).collect::<Vec<_>>(),
        "elapsed_seconds": report.elapsed_seconds,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| io_error(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        assert_eq!(format_number(-2.0), "-2.0000000000000000e0");
        let x = std::f64::consts::PI;
        assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn nan_never_passes() {
        assert!(!Criterion::at_most("x", "nan", f64::NAN, 1.0).pass);
    }
}
