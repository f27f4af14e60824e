//! Metrics reports: per-replicate rows, summary statistics, expectation
//! checks, and bit-stable emission as JSON or CSV.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::jsonfmt::{format_f64_sig9, to_json_bytes};
use crate::scenario::{Expectation, OutputFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn to_csv_field(&self) -> String {
        match self {
            Cell::Bool(b) => b.to_string(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(f) => format_f64_sig9(*f),
            Cell::Text(s) => {
                if s.contains(',') || s.contains('"') || s.contains('\n') {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::Int(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Cell {
        Cell::Int(v as i64)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Float(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Cell {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Cell {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub metric: String,
    pub pass: bool,
    pub detail: String,
}

/// The experiment outcome: replicate rows under fixed columns, summary
/// statistics recomputable from the rows, kind-specific evidence, and the
/// expectation verdict (`None` when nothing was declared or nothing ran).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario_id: String,
    pub kind: String,
    pub seed: u64,
    pub replicates: usize,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: BTreeMap<String, f64>,
    pub evidence: BTreeMap<String, serde_json::Value>,
    pub checks: Vec<CheckResult>,
    pub pass: Option<bool>,
}

impl MetricsReport {
    pub fn new(scenario_id: &str, kind: &str, seed: u64, replicates: usize) -> MetricsReport {
        MetricsReport {
            scenario_id: scenario_id.to_string(),
            kind: kind.to_string(),
            seed,
            replicates,
            columns: Vec::new(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
            evidence: BTreeMap::new(),
            checks: Vec::new(),
            pass: None,
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// Evaluate the declared expectations against the summary.
    pub fn apply_expectations(&mut self, expectations: &[Expectation]) {
        if expectations.is_empty() || self.rows.is_empty() {
            self.pass = None;
            return;
        }
        let mut all_pass = true;
        for exp in expectations {
            let value = self.summary.get(&exp.metric).copied();
            let (pass, detail) = match value {
                None => (false, format!("metric {} absent from summary", exp.metric)),
                Some(v) => {
                    let ge_ok = exp.gte.map_or(true, |bound| v >= bound);
                    let le_ok = exp.lte.map_or(true, |bound| v <= bound);
                    (
                        ge_ok && le_ok,
                        format!(
                            "{} = {}{}{}",
                            exp.metric,
                            format_f64_sig9(v),
                            exp.gte.map_or(String::new(), |b| format!(", wanted >= {b}")),
                            exp.lte.map_or(String::new(), |b| format!(", wanted <= {b}")),
                        ),
                    )
                }
            };
            all_pass &= pass;
            self.checks.push(CheckResult {
                metric: exp.metric.clone(),
                pass,
                detail,
            });
        }
        self.pass = Some(all_pass);
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut bytes = to_json_bytes(self).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(Cell::to_csv_field).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out.into_bytes()
    }

    pub fn emit(&self, format: OutputFormat, path: &Path) -> std::io::Result<()> {
        let bytes = match format {
            OutputFormat::Json => self.to_json_bytes(),
            OutputFormat::Csv => self.to_csv_bytes(),
        };
        let mut file = std::fs::File::create(path)?;
        file.write_all(&bytes)
    }
}

pub fn median_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Interquartile range over the same convention as [`median_of`].
pub fn iqr_of(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |fraction: f64| -> f64 {
        let pos = fraction * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    };
    q(0.75) - q(0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_reports_serialize_identically() {
        let mut a = MetricsReport::new("s", "claim3", 1, 2);
        a.columns = vec!["replicate".into(), "value".into()];
        a.push_row(vec![0usize.into(), 1.5.into()]);
        a.push_row(vec![1usize.into(), 2.5.into()]);
        a.summary.insert("median".into(), 2.0);
        let b = a.clone();
        assert_eq!(a.to_json_bytes(), b.to_json_bytes());
        assert_eq!(a.to_csv_bytes(), b.to_csv_bytes());
    }

    #[test]
    fn csv_and_json_row_counts_agree() {
        let mut r = MetricsReport::new("s", "physical", 3, 2);
        r.columns = vec!["a".into()];
        r.push_row(vec![Cell::Int(1)]);
        r.push_row(vec![Cell::Int(2)]);
        let json: serde_json::Value =
            serde_json::from_slice(&r.to_json_bytes()).unwrap();
        let json_rows = json["rows"].as_array().unwrap().len();
        let csv = String::from_utf8(r.to_csv_bytes()).unwrap();
        let csv_rows = csv.lines().count() - 1;
        assert_eq!(json_rows, csv_rows);
    }

    #[test]
    fn medians_and_iqr() {
        assert_eq!(median_of(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median_of(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(iqr_of(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2.0);
    }

    #[test]
    fn expectations_gate_pass() {
        let mut r = MetricsReport::new("s", "claim3", 0, 1);
        r.columns = vec!["x".into()];
        r.push_row(vec![Cell::Int(1)]);
        r.summary.insert("ratio".into(), 1.5);
        r.apply_expectations(&[Expectation {
            metric: "ratio".into(),
            gte: Some(1.2),
            lte: None,
        }]);
        assert_eq!(r.pass, Some(true));
        r.checks.clear();
        r.apply_expectations(&[Expectation {
            metric: "ratio".into(),
            gte: Some(2.0),
            lte: None,
        }]);
        assert_eq!(r.pass, Some(false));
    }
}
