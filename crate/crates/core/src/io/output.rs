//! Tables and documents on disk. Every float is written with 17
//! significant digits; a missing value is `NaN` in CSV and `null` in JSON.
//! CSV files open with a `#` comment line and JSON documents with a
//! `header` object, both naming the generator version and config hash.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{PistonError, Result};
use crate::io::config::Format;

pub const GENERATOR: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Bumped whenever a file schema changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn io_err(path: &Path, e: io::Error) -> PistonError {
    PistonError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub generator: String,
    pub version: String,
    pub schema: u32,
    pub config_hash: String,
}

impl Header {
    pub fn new(config_hash: &str) -> Self {
        Header {
            generator: GENERATOR.into(),
            version: VERSION.into(),
            schema: SCHEMA_VERSION,
            config_hash: config_hash.into(),
        }
    }

    fn csv_line(&self) -> String {
        format!(
            "# {} {} schema={} config={}",
            self.generator, self.version, self.schema, self.config_hash
        )
    }
}

/// Pretty JSON whose floats use [`fmt_f64`]; non-finite floats become `null`.
struct SigFormatter(PrettyFormatter<'static>);

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| PistonError::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| PistonError::Io(e.to_string()))
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

/// Write `body` (a struct or map) with the header merged in at top level.
pub fn write_json<T: Serialize>(path: &Path, header: &Header, body: &T) -> Result<()> {
    let text = to_json_string(&Document { header, body })?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Cell::Int(v) => (*v).into(),
            Cell::Text(s) => s.clone().into(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

/// Column-named rows, written as CSV or as a JSON array of objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, header: &Header) -> String {
        let mut out = header.csv_line();
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, header: &Header) -> Result<String> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect())
            .collect();
        #[derive(Serialize)]
        struct Body<'a> {
            columns: &'a [String],
            rows: Vec<serde_json::Map<String, serde_json::Value>>,
        }
        to_json_string(&Document {
            header,
            body: &Body {
                columns: &self.columns,
                rows,
            },
        })
    }

    /// Write `<dir>/<stem>.csv` or `<dir>/<stem>.json`; returns the path.
    pub fn write(&self, dir: &Path, stem: &str, format: Format, header: &Header) -> Result<PathBuf> {
        let (path, text) = match format {
            Format::Csv => (dir.join(format!("{stem}.csv")), self.to_csv(header)),
            Format::Json => (dir.join(format!("{stem}.json")), self.to_json(header)?),
        };
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| PistonError::Io(format!("missing column `{name}`")))
    }

    pub fn f64_at(&self, row: usize, col: usize) -> f64 {
        match &self.rows[row][col] {
            Cell::Num(v) => *v,
            Cell::Int(v) => *v as f64,
            Cell::Text(s) => s.parse().unwrap_or(f64::NAN),
        }
    }

    /// Column as floats; text that does not parse becomes NaN.
    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        Ok((0..self.rows.len()).map(|r| self.f64_at(r, c)).collect())
    }

    pub fn parse_csv(text: &str) -> Result<Table> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let head = lines.next().ok_or_else(|| PistonError::Io("empty CSV".into()))?;
        let columns: Vec<String> = head.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let cells: Vec<Cell> = line.split(',').map(|s| Cell::Text(s.to_string())).collect();
            if cells.len() != columns.len() {
                return Err(PistonError::Io(format!(
                    "CSV row {} has {} cells, expected {}",
                    i + 1,
                    cells.len(),
                    columns.len()
                )));
            }
            rows.push(cells);
        }
        Ok(Table { columns, rows })
    }

    pub fn parse_json(text: &str) -> Result<Table> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| PistonError::Io(e.to_string()))?;
        let columns: Vec<String> = v["columns"]
            .as_array()
            .ok_or_else(|| PistonError::Io("table JSON lacks `columns`".into()))?
            .iter()
            .map(|c| c.as_str().unwrap_or_default().to_string())
            .collect();
        let rows = v["rows"]
            .as_array()
            .ok_or_else(|| PistonError::Io("table JSON lacks `rows`".into()))?
            .iter()
            .map(|r| {
                columns
                    .iter()
                    .map(|c| match &r[c] {
                        serde_json::Value::Number(n) => Cell::Num(n.as_f64().unwrap_or(f64::NAN)),
                        serde_json::Value::String(s) => Cell::Text(s.clone()),
                        _ => Cell::Num(f64::NAN),
                    })
                    .collect()
            })
            .collect();
        Ok(Table { columns, rows })
    }

    /// Read `<dir>/<stem>.csv`, falling back to `<dir>/<stem>.json`.
    pub fn read(dir: &Path, stem: &str) -> Result<Table> {
        let csv = dir.join(format!("{stem}.csv"));
        if csv.exists() {
            return Table::parse_csv(&fs::read_to_string(&csv).map_err(|e| io_err(&csv, e))?);
        }
        let json = dir.join(format!("{stem}.json"));
        Table::parse_json(&fs::read_to_string(&json).map_err(|e| io_err(&json, e))?)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2f64.sqrt() * 1e-300, -123456.789, 1e-8, 5e-324] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn empty_table_is_headers_only() {
        let h = Header::new("abc");
        let t = Table::new(&["t", "x"]);
        let csv = t.to_csv(&h);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("# "));
        let json = t.to_json(&h).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 0);
        assert_eq!(v["header"]["config_hash"], "abc");
    }

    #[test]
    fn tables_read_back() {
        let h = Header::new("abc");
        let mut t = Table::new(&["a", "b", "src"]);
        t.push(vec![0.1.into(), f64::NAN.into(), "moc".into()]);
        t.push(vec![(1.0 / 3.0).into(), 7usize.into(), "moc".into()]);
        for back in [
            Table::parse_csv(&t.to_csv(&h)).unwrap(),
            Table::parse_json(&t.to_json(&h).unwrap()).unwrap(),
        ] {
            let a = back.f64_column("a").unwrap();
            assert_eq!(a, vec![0.1, 1.0 / 3.0]);
            assert!(back.f64_column("b").unwrap()[0].is_nan());
            assert_eq!(back.f64_column("b").unwrap()[1], 7.0);
        }
    }

    #[test]
    fn json_floats_use_full_precision() {
        let s = to_json_string(&serde_json::json!({"x": 0.1, "n": 3})).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["x"].as_f64(), Some(0.1));
    }
}
