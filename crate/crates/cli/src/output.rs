//! Table rendering. Every number goes out with nine significant digits.

use std::io::Write;
use std::path::Path;

use aoi_core::numfmt::sig9;
use aoi_core::AnalyticReport;
use serde_json::{Map, Value};

use crate::CliError;

pub const CURVE_COLUMNS: [&str; 11] = [
    "K",
    "eps",
    "lambda_or_param",
    "zeta",
    "e_r",
    "e_psi",
    "e_l",
    "e_l2",
    "avg_age",
    "avg_age_paper_variant",
    "is_kstar",
];

/// A cell of an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => sig9(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            // Round through the printed form so JSON carries the same digits as CSV.
            Cell::Num(v) => sig9(*v).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::config(format!("csv: {e}")))
    }

    pub fn to_json(&self) -> Vec<u8> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                Value::Object(obj)
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&rows).expect("json values serialize");
        out.push(b'\n');
        out
    }

    /// Tab-separated, for terminal reports.
    pub fn to_text(&self) -> String {
        let mut s = self.columns.join("\t");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.iter().map(Cell::render).collect::<Vec<_>>().join("\t"));
            s.push('\n');
        }
        s
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::config(format!("csv: {e}"))
}

pub fn curve_row(report: &AnalyticReport, param: f64, is_kstar: bool) -> Vec<Cell> {
    vec![
        Cell::Int(report.k_max.into()),
        Cell::Num(report.epsilon),
        Cell::Num(param),
        Cell::Num(report.zeta),
        Cell::Num(report.moments.e_r),
        Cell::Num(report.moments.e_psi),
        Cell::Num(report.e_l),
        Cell::Num(report.e_l2),
        Cell::Num(report.avg_age),
        Cell::Num(report.avg_age_paper_variant),
        Cell::Bool(is_kstar),
    ]
}

/// Writes to `path` when given, otherwise to `stdout`.
pub fn emit(path: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display()))),
        None => stdout.write_all(bytes).map_err(CliError::from),
    }
}
