//! Analysis reports: named tables with typed cells, emitted as JSON
//! (whole report) or CSV (one table per file).
//!
//! Numbers are emitted with 6 significant digits by default for diffable
//! output; full precision keeps `parse(emit(x)) = x` exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One table cell. `Empty` is reported as JSON `null` / an empty CSV
/// field, distinguishing "no value" from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
    Empty,
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Empty, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub title: String,
    pub meta: BTreeMap<String, String>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            meta: BTreeMap::new(),
            tables: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.insert(key.into(), value.to_string());
    }

    pub fn push_table(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FloatPrecision {
    /// Round floats to 6 significant digits at emission.
    #[default]
    Significant6,
    /// Emit the shortest representation that parses back exactly.
    Full,
}

/// Rounds to `digits` significant digits. Zero and non-finite values pass
/// through unchanged.
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits as i32 - 1 - magnitude);
    (x * factor).round() / factor
}

fn apply_precision(value: &Value, precision: FloatPrecision) -> Result<Value> {
    match value {
        Value::Float(f) if !f.is_finite() => {
            Err(Error::Numerical(format!("non-finite value {f} in report")))
        }
        Value::Float(f) => Ok(match precision {
            FloatPrecision::Significant6 => Value::Float(round_sig(*f, 6)),
            FloatPrecision::Full => Value::Float(*f),
        }),
        other => Ok(other.clone()),
    }
}

fn rounded(report: &Report, precision: FloatPrecision) -> Result<Report> {
    let mut out = report.clone();
    for table in &mut out.tables {
        for row in &mut table.rows {
            for cell in row.iter_mut() {
                *cell = apply_precision(cell, precision)?;
            }
        }
    }
    Ok(out)
}

/// Serializes the whole report as pretty JSON with a stable key order.
pub fn emit_json(report: &Report, precision: FloatPrecision) -> Result<String> {
    let prepared = rounded(report, precision)?;
    let mut text = serde_json::to_string_pretty(&prepared)?;
    text.push('\n');
    Ok(text)
}

pub fn parse_json(text: &str) -> Result<Report> {
    Ok(serde_json::from_str(text)?)
}

fn format_cell(value: &Value, precision: FloatPrecision) -> Result<String> {
    Ok(match apply_precision(value, precision)? {
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format!("{f}"),
        Value::Str(s) => s,
        Value::Empty => String::new(),
    })
}

/// Serializes one table as CSV (header row plus data rows).
pub fn emit_csv(table: &Table, precision: FloatPrecision) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(&table.columns)
        .map_err(|e| Error::Io(e.to_string()))?;
    for row in &table.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|v| format_cell(v, precision))
            .collect::<Result<_>>()?;
        writer
            .write_record(&cells)
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}
