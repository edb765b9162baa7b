//! Typed columnar datasets, CSV ingestion and the preprocessing steps
//! applied before synthesis (missing-value replacement, level coarsening,
//! row prefixes, column removal).

mod csv_io;
mod preprocess;
mod schema;

pub use csv_io::{load_csv, load_csv_str, write_csv, write_csv_to, DEFAULT_MISSING_TOKENS};
pub use preprocess::{coarsen_levels, drop_column, head_n, replace_missing, LevelMapping};
pub use schema::{ColumnDecl, ColumnKind, ColumnSpec, DeclaredKind, Schema, SchemaDecl};

use crate::error::{Error, Result};

/// A single column's values. Categorical values are indices into the
/// column's level list.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<u32>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, row: usize) -> Value {
        match self {
            Column::Numeric(v) => Value::Num(v[row]),
            Column::Categorical(v) => Value::Cat(v[row]),
        }
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match self {
            Column::Numeric(v) => Some(v),
            Column::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[u32]> {
        match self {
            Column::Categorical(v) => Some(v),
            Column::Numeric(_) => None,
        }
    }

    pub fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    /// Bitwise equality, so that NaN placeholders compare equal.
    pub fn bit_eq(&self, other: &Column) -> bool {
        match (self, other) {
            (Column::Numeric(a), Column::Numeric(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Column::Categorical(a), Column::Categorical(b)) => a == b,
            _ => false,
        }
    }
}

/// One cell value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(u32),
}

impl Value {
    pub fn num(self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(x),
            Value::Cat(_) => None,
        }
    }

    pub fn cat(self) -> Option<u32> {
        match self {
            Value::Cat(c) => Some(c),
            Value::Num(_) => None,
        }
    }
}

/// Immutable columnar table. Every mutating operation returns a new dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Column>,
    /// Sorted row indices of missing cells, per column.
    missing: Vec<Vec<usize>>,
    n_rows: usize,
}

impl Dataset {
    /// Build a complete dataset (no missing cells).
    pub fn new(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        let missing = vec![Vec::new(); columns.len()];
        Self::with_missing(schema, columns, missing)
    }

    pub(crate) fn with_missing(
        schema: Schema,
        columns: Vec<Column>,
        missing: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{} columns supplied for a schema of {}",
                columns.len(),
                schema.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column {:?} has {} rows, expected {n_rows}",
                    spec.name,
                    col.len()
                )));
            }
            match (&spec.kind, col) {
                (ColumnKind::Numeric, Column::Numeric(_)) => {}
                (ColumnKind::Categorical { levels }, Column::Categorical(codes)) => {
                    if let Some(bad) = codes.iter().find(|&&c| c as usize >= levels.len()) {
                        return Err(Error::Schema(format!(
                            "column {:?} holds level index {bad} but has {} levels",
                            spec.name,
                            levels.len()
                        )));
                    }
                }
                (kind, col) => {
                    return Err(Error::KindMismatch {
                        column: spec.name.clone(),
                        expected: kind.name(),
                        found: match col {
                            Column::Numeric(_) => "numeric",
                            Column::Categorical(_) => "categorical",
                        },
                    })
                }
            }
        }
        Ok(Dataset {
            schema,
            columns,
            missing,
            n_rows,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn column_by_name(&self, name: &str) -> Result<&Column> {
        Ok(&self.columns[self.schema.index_of(name)?])
    }

    pub fn numeric(&self, idx: usize) -> Result<&[f64]> {
        self.columns[idx].as_numeric().ok_or_else(|| Error::KindMismatch {
            column: self.schema.column(idx).name.clone(),
            expected: "numeric",
            found: "categorical",
        })
    }

    pub fn categorical(&self, idx: usize) -> Result<&[u32]> {
        self.columns[idx]
            .as_categorical()
            .ok_or_else(|| Error::KindMismatch {
                column: self.schema.column(idx).name.clone(),
                expected: "categorical",
                found: "numeric",
            })
    }

    pub fn missing_rows(&self, idx: usize) -> &[usize] {
        &self.missing[idx]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().map(Vec::len).sum()
    }

    pub fn is_missing(&self, col: usize, row: usize) -> bool {
        self.missing[col].binary_search(&row).is_ok()
    }

    /// Fails if any cell is still flagged missing.
    pub fn ensure_complete(&self) -> Result<()> {
        match self.missing_count() {
            0 => Ok(()),
            n => Err(Error::MissingCells(n)),
        }
    }

    /// Rows in the given order (indices may repeat, as in a bootstrap).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self.columns.iter().map(|c| c.select(rows)).collect();
        let missing = self
            .missing
            .iter()
            .map(|m| {
                if m.is_empty() {
                    Vec::new()
                } else {
                    rows.iter()
                        .enumerate()
                        .filter(|(_, r)| m.binary_search(r).is_ok())
                        .map(|(i, _)| i)
                        .collect()
                }
            })
            .collect();
        Dataset {
            schema: self.schema.clone(),
            columns,
            missing,
            n_rows: rows.len(),
        }
    }

    /// Label of a categorical cell, or the decimal rendering of a numeric one.
    pub fn render(&self, col: usize, row: usize) -> String {
        match (&self.schema.column(col).kind, &self.columns[col]) {
            (ColumnKind::Categorical { levels }, Column::Categorical(v)) => {
                levels[v[row] as usize].clone()
            }
            (_, Column::Numeric(v)) => v[row].to_string(),
            _ => unreachable!("schema and column kinds are validated at construction"),
        }
    }

    /// Value-level equality: same schema, same values (bitwise for numerics),
    /// same missing flags.
    pub fn same_data(&self, other: &Dataset) -> bool {
        self.schema == other.schema
            && self.n_rows == other.n_rows
            && self.missing == other.missing
            && self
                .columns
                .iter()
                .zip(&other.columns)
                .all(|(a, b)| a.bit_eq(b))
    }
}
