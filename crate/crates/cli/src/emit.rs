//! CSV and JSON writers. Floats carry 17 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::config::RunConfig;

/// Column names and rows of one result table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Text(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}
impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}
impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}
impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// JSON formatter printing every float as `{:.16e}`; non-finite values become null.
struct Precise;

impl Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Precise);
    value.serialize(&mut ser).map_err(io::Error::other)?;
    out.push(b'\n');
    Ok(out)
}

/// Header comment with the config echo, then an RFC 4180 table.
pub fn csv_bytes(config: &RunConfig, table: &Table) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# config={}", String::from_utf8(to_json(config)?).map_err(io::Error::other)?.trim_end())?;
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    drop(w);
    Ok(out)
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    config: &'a RunConfig,
    results: &'a T,
}

/// One JSON document: the config echo plus the results.
pub fn json_bytes<T: Serialize>(config: &RunConfig, results: &T) -> io::Result<Vec<u8>> {
    to_json(&Document { config, results })
}

/// Rows of a table as JSON objects keyed by column.
pub fn table_records(table: &Table) -> Vec<serde_json::Map<String, serde_json::Value>> {
    table
        .rows
        .iter()
        .map(|row| {
            table
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.clone(), serde_json::to_value(v).expect("cells serialize")))
                .collect()
        })
        .collect()
}
