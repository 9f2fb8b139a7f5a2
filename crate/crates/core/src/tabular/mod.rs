//! Typed, immutable tables.
//!
//! Every other module reads data through [`Table`]. Rows are addressed by
//! their 0-based position, which is also the index shown to language models
//! when a table is rendered, so cited row numbers resolve without ambiguity.

mod stats;
mod synth;
mod value;

use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use stats::{summary_stats, ColumnStats, StatsTable};
pub use synth::{sales_schema, synth_sales, FOCUS_STATES};
pub(crate) use synth::scale_cents;
pub use value::{parse_cell, py_float, render_float, ColumnType, Value};


#[derive(Debug, Error)]
pub enum TabularError {
    #[error("malformed CSV at data row {row}{}: {message}", column.as_ref().map(|c| format!(", column `{c}`")).unwrap_or_default())]
    MalformedCsv {
        row: usize,
        column: Option<String>,
        message: String,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("table has no numeric columns")]
    NoNumericColumns,
    #[error("window start {start} is out of bounds for {rows} rows (length {length})")]
    OutOfBounds {
        start: usize,
        length: usize,
        rows: usize,
    },
    #[error("group `{group}` has {available} rows, {requested} requested")]
    GroupTooSmall {
        group: String,
        available: usize,
        requested: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

/// Ordered, uniquely named columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Column>", into = "Vec<Column>")]
pub struct Schema {
    columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self, TabularError> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(TabularError::Schema(format!(
                    "duplicate column `{}`",
                    c.name
                )));
            }
        }
        Ok(Self { columns })
    }

    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, ColumnType)>,
    ) -> Result<Self, TabularError> {
        Self::new(
            pairs
                .into_iter()
                .map(|(name, ty)| Column {
                    name: name.to_string(),
                    ty,
                })
                .collect(),
        )
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// One `name: type` line per column.
    pub fn describe(&self) -> String {
        self.columns
            .iter()
            .map(|c| format!("{}: {}", c.name, c.ty))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl TryFrom<Vec<Column>> for Schema {
    type Error = TabularError;
    fn try_from(columns: Vec<Column>) -> Result<Self, Self::Error> {
        Schema::new(columns)
    }
}

impl From<Schema> for Vec<Column> {
    fn from(s: Schema) -> Self {
        s.columns
    }
}

/// A single cell replacement, used to derive new tables.
#[derive(Debug, Clone, PartialEq)]
pub struct CellEdit {
    pub row: usize,
    pub column: usize,
    pub value: Value,
}

/// Immutable typed table. Every row has exactly one cell per column and each
/// cell is either null or of its column's type.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: Schema,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Self, TabularError> {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(TabularError::Schema(format!(
                    "row {r} has {} cells, expected {}",
                    row.len(),
                    schema.len()
                )));
            }
            for (cell, col) in row.iter().zip(schema.columns()) {
                if let Some(t) = cell.column_type() {
                    if t != col.ty {
                        return Err(TabularError::Schema(format!(
                            "row {r}, column `{}`: {t} value in {} column",
                            col.name, col.ty
                        )));
                    }
                }
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> Option<&[Value]> {
        self.rows.get(index).map(Vec::as_slice)
    }

    pub fn cell(&self, row: usize, column: &str) -> Option<&Value> {
        let c = self.schema.index_of(column)?;
        self.rows.get(row).map(|r| &r[c])
    }

    pub fn column_values(&self, column: &str) -> Result<impl Iterator<Item = &Value>, TabularError> {
        let c = self
            .schema
            .index_of(column)
            .ok_or_else(|| TabularError::UnknownColumn(column.to_string()))?;
        Ok(self.rows.iter().map(move |r| &r[c]))
    }

    /// New table with the listed rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Table {
        Table {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// New table with `edits` applied; the receiver is left untouched.
    pub fn with_edits(&self, edits: &[CellEdit]) -> Result<Table, TabularError> {
        let mut rows = self.rows.clone();
        for e in edits {
            let row = rows
                .get_mut(e.row)
                .ok_or_else(|| TabularError::InvalidArgument(format!("row {} out of range", e.row)))?;
            let cell = row.get_mut(e.column).ok_or_else(|| {
                TabularError::InvalidArgument(format!("column {} out of range", e.column))
            })?;
            *cell = e.value.clone();
        }
        Table::new(self.schema.clone(), rows)
    }

    /// SHA-256 of the canonical CSV export.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(export_csv(self).as_bytes()))
    }
}

/// Reads a CSV with a header row. Without a hint, each column gets the most
/// specific type accepting all of its cells.
pub fn load_csv(source: impl Read, schema_hint: Option<&Schema>) -> Result<Table, TabularError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let malformed = |row: usize, message: String| TabularError::MalformedCsv {
        row,
        column: None,
        message,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(0, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut raw: Vec<csv::StringRecord> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| malformed(i, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(malformed(
                i,
                format!("ragged row: {} fields, header has {}", rec.len(), header.len()),
            ));
        }
        raw.push(rec);
    }

    let schema = match schema_hint {
        Some(hint) => {
            let names: Vec<&str> = hint.names().collect();
            if names != header.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(TabularError::Schema(format!(
                    "header {header:?} does not match hinted columns {names:?}"
                )));
            }
            hint.clone()
        }
        None => {
            let cols = header
                .iter()
                .enumerate()
                .map(|(c, name)| Column {
                    name: name.clone(),
                    ty: value::infer_type(raw.iter().map(move |r| &r[c])),
                })
                .collect();
            Schema::new(cols)?
        }
    };

    let mut rows = Vec::with_capacity(raw.len());
    for (r, rec) in raw.iter().enumerate() {
        let mut row = Vec::with_capacity(schema.len());
        for (cell, col) in rec.iter().zip(schema.columns()) {
            let v = parse_cell(cell, col.ty).map_err(|message| TabularError::MalformedCsv {
                row: r,
                column: Some(col.name.clone()),
                message,
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Table::new(schema, rows)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory csv writer");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// Canonical CSV (RFC 4180 quoting). `load_csv(export, Some(schema))`
/// reproduces the table exactly.
pub fn export_csv(table: &Table) -> String {
    let mut w = csv_writer();
    w.write_record(table.schema.names()).expect("in-memory write");
    for row in &table.rows {
        w.write_record(row.iter().map(Value::export))
            .expect("in-memory write");
    }
    finish(w)
}

/// Renders rows `[start, min(start + length, rows))` as CSV whose first,
/// unnamed column is the absolute row index.
pub fn render_window(table: &Table, start: usize, length: usize) -> Result<String, TabularError> {
    let rows = table.num_rows();
    if start >= rows || length == 0 {
        return Err(TabularError::OutOfBounds {
            start,
            length,
            rows,
        });
    }
    let end = rows.min(start.saturating_add(length));
    let mut w = csv_writer();
    w.write_record(std::iter::once("").chain(table.schema.names()))
        .expect("in-memory write");
    for (i, row) in table.rows[start..end].iter().enumerate() {
        let mut rec = Vec::with_capacity(row.len() + 1);
        rec.push((start + i).to_string());
        rec.extend(row.iter().map(Value::render));
        w.write_record(&rec).expect("in-memory write");
    }
    Ok(finish(w))
}

/// Draws `per_group` rows for each listed value of `column`, seeded and
/// reproducible. Output rows keep their original relative order.
pub fn subsample_balanced(
    table: &Table,
    column: &str,
    per_group: usize,
    groups: &[&str],
    seed: u64,
) -> Result<Table, TabularError> {
    let c = table
        .schema
        .index_of(column)
        .ok_or_else(|| TabularError::UnknownColumn(column.to_string()))?;
    let mut members: HashMap<&str, Vec<usize>> = HashMap::new();
    for g in groups {
        if members.insert(g, Vec::new()).is_some() {
            return Err(TabularError::InvalidArgument(format!(
                "group `{g}` listed twice"
            )));
        }
    }
    for (i, row) in table.rows.iter().enumerate() {
        let key = row[c].export();
        if let Some(v) = members.get_mut(key.as_str()) {
            v.push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(per_group * groups.len());
    for g in groups {
        let pool = &members[g];
        if pool.len() < per_group {
            return Err(TabularError::GroupTooSmall {
                group: g.to_string(),
                available: pool.len(),
                requested: per_group,
            });
        }
        let picks = rand::seq::index::sample(&mut rng, pool.len(), per_group);
        chosen.extend(picks.iter().map(|k| pool[k]));
    }
    chosen.sort_unstable();
    Ok(table.select_rows(&chosen))
}
