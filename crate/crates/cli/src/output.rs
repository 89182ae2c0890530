//! CSV and JSON writers. Every artifact carries the tool version and the SHA-256 of the
//! canonical run description (effective config plus command), so a header reproduces its table.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, OutputConfig};
use crate::error::CliError;

pub const TOOL: &str = concat!("ruin ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
    Bool(bool),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as u64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Self::Int(v.into())
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Self::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Self::Bool(v)
    }
}

/// Rows of named columns. `scalar` tables hold one row and print as a JSON object.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub scalar: bool,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new(), scalar: false }
    }

    pub fn scalar(columns: &[&'static str], row: Vec<Cell>) -> Self {
        Self { columns: columns.to_vec(), rows: vec![row], scalar: true }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest decimal that round-trips the value rounded to `precision` significant digits.
pub fn format_number(v: f64, precision: usize) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{}", round_significant(v, precision))
}

fn round_significant(v: f64, precision: usize) -> f64 {
    if precision >= 17 || v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", precision - 1, v).parse().unwrap_or(v)
}

fn cell_text(c: &Cell, precision: usize) -> String {
    match c {
        Cell::Int(v) => v.to_string(),
        Cell::Num(v) => format_number(*v, precision),
        Cell::Text(s) => s.clone(),
        Cell::Bool(b) => b.to_string(),
    }
}

fn cell_json(c: &Cell, precision: usize) -> Value {
    match c {
        Cell::Int(v) => json!(v),
        Cell::Num(v) if v.is_finite() => json!(round_significant(*v, precision)),
        Cell::Num(v) => json!(format_number(*v, precision)),
        Cell::Text(s) => json!(s),
        Cell::Bool(b) => json!(b),
    }
}

/// Canonical description of one invocation and its hash.
pub struct RunStamp {
    pub run: Value,
    pub sha256: String,
}

impl RunStamp {
    pub fn new(run: &impl Serialize) -> Result<Self, CliError> {
        let run = serde_json::to_value(run).map_err(|e| CliError::Output(e.to_string()))?;
        let text = serde_json::to_string(&run).map_err(|e| CliError::Output(e.to_string()))?;
        let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(Self { run, sha256 })
    }

    fn header_lines(&self) -> Vec<String> {
        vec![
            format!("# tool: {TOOL}"),
            format!("# config_sha256: {}", self.sha256),
            format!("# run: {}", self.run),
        ]
    }
}

pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| CliError::Output(format!("cannot create {}: {e}", p.display()))),
        None => Ok(Box::new(io::BufWriter::new(io::stdout().lock()))),
    }
}

pub fn write_csv(out: &mut dyn Write, stamp: &RunStamp, table: &Table, precision: usize) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Output(e.to_string());
    for line in stamp.header_lines() {
        writeln!(out, "{line}").map_err(io_err)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| cell_text(c, precision))).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_json(out: &mut dyn Write, stamp: &RunStamp, table: &Table, precision: usize) -> Result<(), CliError> {
    let object = |row: &Vec<Cell>| {
        let map: Map<String, Value> = table
            .columns
            .iter()
            .zip(row)
            .map(|(k, c)| (k.to_string(), cell_json(c, precision)))
            .collect();
        Value::Object(map)
    };
    let result = if table.scalar && table.rows.len() == 1 {
        object(&table.rows[0])
    } else {
        Value::Array(table.rows.iter().map(object).collect())
    };
    let doc = json!({
        "tool": TOOL,
        "config_sha256": stamp.sha256,
        "run": stamp.run,
        "result": result,
    });
    serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| CliError::Output(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::Output(e.to_string()))
}

pub fn emit(table: &Table, stamp: &RunStamp, output: &OutputConfig) -> Result<(), CliError> {
    let mut out = open(output.path.as_deref())?;
    match output.format {
        Format::Csv => write_csv(&mut *out, stamp, table, output.precision),
        Format::Json => write_json(&mut *out, stamp, table, output.precision),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        let v = 0.1 + 0.2;
        assert_eq!(format_number(v, 17).parse::<f64>().unwrap(), v);
        assert_eq!(format_number(v, 3), "0.3");
        assert_eq!(format_number(123456.0, 2), "120000");
        assert_eq!(format_number(f64::INFINITY, 17), "inf");
        assert_eq!(format_number(0.0, 5), "0");
    }
}
