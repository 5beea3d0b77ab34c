//! Output formats: whitespace-separated tables with a `# key: value` header,
//! a JSON run manifest, and JSON-lines trajectory logs. Floats are written
//! in a fixed scientific format so identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "nan".into(),
            Cell::Num(v) => format!("{v:.12e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.replace(char::is_whitespace, "_"),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
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
        Cell::Int(v as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Text("none".into()), Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub doc: String,
}

/// A documented table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn column(mut self, name: &str, doc: &str) -> Self {
        self.columns.push(Column {
            name: name.into(),
            doc: doc.into(),
        });
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Values of one column.
    pub fn column_values(&self, name: &str) -> Option<Vec<Cell>> {
        let i = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[i].clone()).collect())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# table: {}", self.name);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        for (i, c) in self.columns.iter().enumerate() {
            let _ = writeln!(s, "# column {}: {} - {}", i + 1, c.name, c.doc);
        }
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        let _ = writeln!(s, "# {}", names.join("\t"));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(s, "{}", cells.join("\t"));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.tsv", self.name));
        write_file(&path, self.render().as_bytes())?;
        Ok(path)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?);
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

/// Metadata pairs, column names and rows of a parsed table.
pub type ParsedTable = (Vec<(String, String)>, Vec<String>, Vec<Vec<String>>);

/// Parses a table written by [`Table::render`]; metadata and numeric cells
/// only.
pub fn parse_table(text: &str) -> ParsedTable {
    let mut meta = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some((k, v)) = rest.split_once(": ") {
                meta.push((k.to_string(), v.to_string()));
            } else {
                header = rest.split('\t').map(String::from).collect();
            }
        } else if !line.is_empty() {
            rows.push(line.split('\t').map(String::from).collect());
        }
    }
    (meta, header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new("demo")
            .meta("atoms", 50)
            .column("t", "time")
            .column("f", "value")
            .column("tag", "label");
        t.push(vec![0.0.into(), 1.5.into(), "a b".into()]);
        t.push(vec![1.0.into(), None.into(), Cell::Int(3)]);
        let text = t.render();
        assert!(text.contains("# atoms: 50"));
        let (meta, header, rows) = parse_table(&text);
        assert_eq!(meta[0], ("table".to_string(), "demo".to_string()));
        assert_eq!(header, vec!["t", "f", "tag"]);
        assert_eq!(rows[0], vec!["0.000000000000e0", "1.500000000000e0", "a_b"]);
        assert_eq!(rows[1][1], "none");
        assert_eq!(rows[0][1].parse::<f64>().unwrap(), 1.5);
    }

    #[test]
    fn jsonl_one_record_per_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        write_jsonl(&p, &[1, 2, 3]).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "1\n2\n3\n");
    }
}
