//! Delimited tables with a units header row; numbers carry 12 significant digits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    /// Operation that produced the values.
    pub provenance: String,
}

/// Values are stored pre-formatted so that parse(serialize(t)) == t.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<String>>,
}

/// 12 significant digits, scientific notation, no negative zero.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.11e}")
}

pub fn col(name: &str, unit: &str, provenance: &str) -> Column {
    Column { name: name.into(), unit: unit.into(), provenance: provenance.into() }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => if *b { "1" } else { "0" }.into(),
        }
    }
}

impl Table {
    pub fn new(name: &str, columns: Vec<Column>) -> Self {
        Self { name: name.into(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row.iter().map(Cell::render).collect());
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn get_f64(&self, row: usize, name: &str) -> Option<f64> {
        let c = self.column_index(name)?;
        self.rows.get(row)?.get(c)?.parse().ok()
    }

    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        (0..self.rows.len()).map(|r| self.get_f64(r, name)).collect()
    }

    fn header(&self) -> Vec<String> {
        self.columns.iter().map(|c| if c.unit.is_empty() { c.name.clone() } else { format!("{} [{}]", c.name, c.unit) }).collect()
    }

    pub fn serialize(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let map = |e: csv::Error| Error::Config(format!("table {}: {e}", self.name));
        w.write_record(self.header()).map_err(map)?;
        for r in &self.rows {
            w.write_record(r).map_err(map)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    /// Inverse of `serialize`; provenance is not carried in the file.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::Config(e.to_string()))?.clone();
        let columns = headers
            .iter()
            .map(|h| match h.rfind(" [") {
                Some(i) if h.ends_with(']') => col(&h[..i], &h[i + 2..h.len() - 1], ""),
                _ => col(h, "", ""),
            })
            .collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(String::from).collect()).map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(Self { name: name.into(), columns, rows })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(self.file_name());
        std::fs::write(&path, self.serialize()?).map_err(|source| Error::Io { path: path.display().to_string(), source })
    }

    pub fn without_provenance(&self) -> Self {
        let mut t = self.clone();
        t.columns.iter_mut().for_each(|c| c.provenance.clear());
        t
    }
}
