//! Tables of text cells with two distinguishable null kinds.
//!
//! A `Missing` null was present in the input file; a `Produced` null is
//! created by integration when a source table lacks an attribute entirely.
//! Freshly loaded tables never contain `Produced` cells.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Value(String),
    /// Null present in an input table.
    Missing,
    /// Null created during integration.
    Produced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullKind {
    None,
    Missing,
    Produced,
}

impl Cell {
    pub fn value(s: impl Into<String>) -> Self {
        Cell::Value(s.into())
    }

    /// Interpret a raw CSV field, mapping null tokens to `Missing`.
    pub fn parse_field(raw: &str) -> Self {
        if is_null_token(raw) {
            Cell::Missing
        } else {
            Cell::Value(raw.to_string())
        }
    }

    pub fn is_null(&self) -> bool {
        !matches!(self, Cell::Value(_))
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn null_kind(&self) -> NullKind {
        match self {
            Cell::Value(_) => NullKind::None,
            Cell::Missing => NullKind::Missing,
            Cell::Produced => NullKind::Produced,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Value(v) => f.write_str(v),
            Cell::Missing => f.write_str("±"),
            Cell::Produced => f.write_str("⊥"),
        }
    }
}

/// `""`, `NA` and `null` (any case, surrounding whitespace ignored).
pub fn is_null_token(raw: &str) -> bool {
    let t = raw.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("null")
}

/// Lowercased, whitespace-trimmed form used for value comparison.
pub fn normalize_value(raw: &str) -> String {
    raw.trim().to_lowercase()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// Row 1 is a header iff none of its cells parses as a number.
    #[default]
    Auto,
    Present,
    Absent,
}

impl std::str::FromStr for HeaderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(HeaderMode::Auto),
            "present" => Ok(HeaderMode::Present),
            "absent" => Ok(HeaderMode::Absent),
            other => Err(Error::InvalidParameter(format!("header mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    id: String,
    columns: Vec<String>,
    synthetic: Vec<bool>,
    rows: Vec<Vec<Cell>>,
    source: Option<PathBuf>,
}

impl PartialEq for Table {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.columns == other.columns
            && self.synthetic == other.synthetic
            && self.rows == other.rows
    }
}

impl Eq for Table {}

fn synthetic_name(idx: usize) -> String {
    format!("col_{idx}")
}

impl Table {
    /// Build a table from in-memory rows. Column names must be unique and
    /// every row must have one cell per column.
    pub fn new(id: impl Into<String>, columns: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let id = id.into();
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate column `{c}` in table `{id}`"
                )));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::RowArity {
                    path: id.clone(),
                    row: i,
                    found: row.len(),
                    expected: columns.len(),
                });
            }
        }
        let synthetic = columns
            .iter()
            .enumerate()
            .map(|(i, c)| *c == synthetic_name(i))
            .collect();
        Ok(Table {
            id,
            columns,
            synthetic,
            rows,
            source: None,
        })
    }

    /// Convenience constructor from string literals; `None` becomes `Missing`.
    pub fn from_literals(id: &str, columns: &[&str], rows: &[&[Option<&str>]]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| c.map_or(Cell::Missing, Cell::value))
                    .collect()
            })
            .collect();
        Table::new(id, columns.iter().map(|c| c.to_string()).collect(), rows)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Whether the header of column `idx` was synthesized (`col_<idx>`).
    pub fn is_synthetic(&self, idx: usize) -> bool {
        self.synthetic[idx]
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub(crate) fn with_source(mut self, path: PathBuf) -> Self {
        self.source = Some(path);
        self
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn column_index(&self, column: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| Error::UnknownColumn {
                table: self.id.clone(),
                column: column.to_string(),
            })
    }

    pub fn column_cells(&self, idx: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[idx])
    }

    /// Normalized distinct non-null values of a column.
    pub fn column_values(&self, column: &str) -> Result<BTreeSet<String>> {
        let idx = self.column_index(column)?;
        Ok(self.column_values_at(idx))
    }

    pub fn column_values_at(&self, idx: usize) -> BTreeSet<String> {
        self.column_cells(idx)
            .filter_map(Cell::as_str)
            .map(normalize_value)
            .collect()
    }

    pub fn count_nulls(&self, kind: NullKind) -> usize {
        self.rows
            .iter()
            .flatten()
            .filter(|c| c.null_kind() == kind)
            .count()
    }

    /// First `n` rows as a new table with the same header.
    pub fn preview(&self, n: usize) -> Table {
        Table {
            id: self.id.clone(),
            columns: self.columns.clone(),
            synthetic: self.synthetic.clone(),
            rows: self.rows.iter().take(n).cloned().collect(),
            source: self.source.clone(),
        }
    }

    /// Parse CSV text. `name` is used both as the table id and in errors.
    pub fn from_csv_str(name: &str, text: &str, header_mode: HeaderMode) -> Result<Self> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut records: Vec<csv::StringRecord> = Vec::new();
        for rec in reader.records() {
            records.push(rec.map_err(|e| Error::Csv {
                path: name.to_string(),
                message: e.to_string(),
            })?);
        }

        let has_header = match (header_mode, records.first()) {
            (_, None) => false,
            (HeaderMode::Present, _) => true,
            (HeaderMode::Absent, _) => false,
            (HeaderMode::Auto, Some(first)) => !first.iter().any(parses_as_number),
        };

        let width = records.first().map_or(0, |r| r.len());
        let (columns, synthetic) = if has_header {
            dedup_headers(&records[0])
        } else {
            ((0..width).map(synthetic_name).collect(), vec![true; width])
        };

        let body = if has_header { &records[1..] } else { &records[..] };
        let first_data_line = if has_header { 2 } else { 1 };
        let mut rows = Vec::with_capacity(body.len());
        for (i, rec) in body.iter().enumerate() {
            if rec.len() != width {
                return Err(Error::RowArity {
                    path: name.to_string(),
                    row: i + first_data_line,
                    found: rec.len(),
                    expected: width,
                });
            }
            rows.push(rec.iter().map(Cell::parse_field).collect());
        }

        Ok(Table {
            id: name.to_string(),
            columns,
            synthetic,
            rows,
            source: None,
        })
    }

    /// Load a CSV file; the table id is the file name.
    pub fn load(path: impl AsRef<Path>, header_mode: HeaderMode) -> Result<Self> {
        let path = path.as_ref();
        let id = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::load_as(path, &id, header_mode)
    }

    pub fn load_as(path: impl AsRef<Path>, id: &str, header_mode: HeaderMode) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: format!("invalid UTF-8: {e}"),
        })?;
        let mut table = Self::from_csv_str(id, &text, header_mode)?;
        table.source = Some(path.to_path_buf());
        Ok(table)
    }

    /// Render as RFC-4180 CSV with `\n` line endings; nulls become empty fields.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        // Writes into a Vec cannot fail.
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.as_str().unwrap_or("")))
                .expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("cells are valid UTF-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

fn parses_as_number(s: &str) -> bool {
    s.trim().parse::<f64>().is_ok_and(f64::is_finite)
}

fn dedup_headers(rec: &csv::StringRecord) -> (Vec<String>, Vec<bool>) {
    let mut used = HashSet::new();
    let mut columns = Vec::with_capacity(rec.len());
    let mut synthetic = Vec::with_capacity(rec.len());
    for (i, raw) in rec.iter().enumerate() {
        let trimmed = raw.trim();
        let base = if trimmed.is_empty() {
            synthetic_name(i)
        } else {
            trimmed.to_string()
        };
        let mut name = base.clone();
        let mut n = 1;
        while used.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        synthetic.push(name == synthetic_name(i));
        used.insert(name.clone());
        columns.push(name);
    }
    (columns, synthetic)
}
