use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{Column, ColumnKind, ColumnSpec, Dataset, DeclaredKind, Schema, SchemaDecl};
use crate::error::{Error, Result};

pub const DEFAULT_MISSING_TOKENS: [&str; 2] = ["", "NA"];

pub fn load_csv(path: &Path, decl: &SchemaDecl, missing_tokens: &[&str]) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, decl, missing_tokens)
        .map_err(|e| e.context(format!("loading {}", path.display())))
}

pub fn load_csv_str(text: &str, decl: &SchemaDecl, missing_tokens: &[&str]) -> Result<Dataset> {
    read_csv(text.as_bytes(), decl, missing_tokens)
}

enum Builder {
    Numeric(Vec<f64>),
    Declared {
        lookup: HashMap<String, u32>,
        codes: Vec<u32>,
    },
    Inferred {
        lookup: HashMap<String, u32>,
        levels: Vec<String>,
        codes: Vec<u32>,
    },
}

fn read_csv<R: Read>(reader: R, decl: &SchemaDecl, missing_tokens: &[&str]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers()?.clone();

    // file position -> schema position
    let mut slot_of_field = Vec::with_capacity(header.len());
    let mut seen = vec![false; decl.columns.len()];
    for name in header.iter() {
        let idx = decl
            .columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        if seen[idx] {
            return Err(Error::Schema(format!("column {name:?} appears twice in header")));
        }
        seen[idx] = true;
        slot_of_field.push(idx);
    }
    if let Some(absent) = seen.iter().position(|s| !s) {
        return Err(Error::Schema(format!(
            "column {:?} declared in schema but absent from file",
            decl.columns[absent].name
        )));
    }

    let mut builders: Vec<Builder> = decl
        .columns
        .iter()
        .map(|c| match &c.kind {
            DeclaredKind::Numeric => Builder::Numeric(Vec::new()),
            DeclaredKind::Categorical { levels } => Builder::Declared {
                lookup: levels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.clone(), i as u32))
                    .collect(),
                codes: Vec::new(),
            },
            DeclaredKind::CategoricalInfer => Builder::Inferred {
                lookup: HashMap::new(),
                levels: Vec::new(),
                codes: Vec::new(),
            },
        })
        .collect();
    let mut missing: Vec<Vec<usize>> = vec![Vec::new(); decl.columns.len()];
    let is_token = |cell: &str| missing_tokens.iter().any(|t| *t == cell || *t == cell.trim());

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (field, cell) in record.iter().enumerate() {
            let slot = slot_of_field[field];
            let name = &decl.columns[slot].name;
            match &mut builders[slot] {
                Builder::Numeric(values) => {
                    if is_token(cell) {
                        missing[slot].push(row);
                        values.push(f64::NAN);
                        continue;
                    }
                    let v: f64 = cell.trim().parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(
                        || Error::NumericParse {
                            column: name.clone(),
                            row,
                            value: cell.to_string(),
                        },
                    )?;
                    values.push(v);
                }
                Builder::Declared { lookup, codes } => match lookup.get(cell) {
                    Some(&code) => codes.push(code),
                    None if is_token(cell) => {
                        missing[slot].push(row);
                        codes.push(0);
                    }
                    None => {
                        return Err(Error::UnknownLevel {
                            column: name.clone(),
                            level: cell.to_string(),
                        })
                    }
                },
                Builder::Inferred {
                    lookup,
                    levels,
                    codes,
                } => {
                    if is_token(cell) {
                        missing[slot].push(row);
                        codes.push(0);
                        continue;
                    }
                    let next = levels.len() as u32;
                    let code = *lookup.entry(cell.to_string()).or_insert_with(|| {
                        levels.push(cell.to_string());
                        next
                    });
                    codes.push(code);
                }
            }
        }
    }

    let mut specs = Vec::with_capacity(decl.columns.len());
    let mut columns = Vec::with_capacity(decl.columns.len());
    for (c, b) in decl.columns.iter().zip(builders) {
        let (kind, col) = match b {
            Builder::Numeric(v) => (ColumnKind::Numeric, Column::Numeric(v)),
            Builder::Declared { codes, .. } => {
                let DeclaredKind::Categorical { levels } = &c.kind else {
                    unreachable!()
                };
                (
                    ColumnKind::Categorical {
                        levels: levels.clone(),
                    },
                    Column::Categorical(codes),
                )
            }
            Builder::Inferred { levels, codes, .. } => {
                if levels.is_empty() {
                    return Err(Error::NoDonors(c.name.clone()));
                }
                (ColumnKind::Categorical { levels }, Column::Categorical(codes))
            }
        };
        specs.push(ColumnSpec {
            name: c.name.clone(),
            kind,
        });
        columns.push(col);
    }
    Dataset::with_missing(Schema::new(specs)?, columns, missing)
}

/// Write with a header row in schema order. Missing cells are written empty.
pub fn write_csv_to<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ds.schema().names())?;
    let mut record = Vec::with_capacity(ds.n_cols());
    for row in 0..ds.n_rows() {
        record.clear();
        for col in 0..ds.n_cols() {
            if ds.is_missing(col, row) {
                record.push(String::new());
            } else {
                record.push(ds.render(col, row));
            }
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, std::io::BufWriter::new(file))
}
