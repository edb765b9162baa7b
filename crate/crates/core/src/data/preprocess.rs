use std::collections::HashMap;

use rand::Rng;

use super::{Column, ColumnKind, ColumnSpec, Dataset, Schema};
use crate::error::{Error, Result};
use crate::rng;

/// Replace every flagged-missing cell by a uniform draw from the observed
/// values of the same column. Each column uses its own derived stream.
pub fn replace_missing(ds: &Dataset, seed: u64) -> Result<Dataset> {
    if ds.missing_count() == 0 {
        return Ok(ds.clone());
    }
    let mut columns = Vec::with_capacity(ds.n_cols());
    for (idx, col) in ds.columns().iter().enumerate() {
        let missing = ds.missing_rows(idx);
        if missing.is_empty() {
            columns.push(col.clone());
            continue;
        }
        let observed: Vec<usize> = {
            let mut m = missing.iter().peekable();
            (0..ds.n_rows())
                .filter(|r| {
                    if m.peek() == Some(&r) {
                        m.next();
                        false
                    } else {
                        true
                    }
                })
                .collect()
        };
        if observed.is_empty() {
            return Err(Error::NoDonors(ds.schema().column(idx).name.clone()));
        }
        let mut rng = rng::stream(seed, &[idx as u64]);
        let mut col = col.clone();
        for &row in missing {
            let donor = observed[rng.random_range(0..observed.len())];
            match &mut col {
                Column::Numeric(v) => v[row] = v[donor],
                Column::Categorical(v) => v[row] = v[donor],
            }
        }
        columns.push(col);
    }
    Dataset::new(ds.schema().clone(), columns)
}

/// Original label -> coarse label, for one categorical column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMapping {
    pub column: String,
    pub pairs: Vec<(String, String)>,
}

impl LevelMapping {
    pub fn new<S: Into<String>>(column: S, pairs: impl IntoIterator<Item = (S, S)>) -> Self {
        LevelMapping {
            column: column.into(),
            pairs: pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
        }
    }
}

/// Rewrite a categorical column under `map`. Coarse levels are ordered by
/// first appearance in the mapping.
pub fn coarsen_levels(ds: &Dataset, map: &LevelMapping) -> Result<Dataset> {
    let idx = ds.schema().index_of(&map.column)?;
    let ColumnKind::Categorical { levels } = &ds.schema().column(idx).kind else {
        return Err(Error::KindMismatch {
            column: map.column.clone(),
            expected: "categorical",
            found: "numeric",
        });
    };
    let mut target: HashMap<&str, &str> = HashMap::new();
    for (from, to) in &map.pairs {
        if !levels.contains(from) {
            return Err(Error::UnknownLevel {
                column: map.column.clone(),
                level: from.clone(),
            });
        }
        if target.insert(from, to).is_some() {
            return Err(Error::InvalidArgument(format!(
                "level {from:?} mapped more than once"
            )));
        }
    }
    let mut coarse: Vec<String> = Vec::new();
    for (_, to) in &map.pairs {
        if !coarse.contains(to) {
            coarse.push(to.clone());
        }
    }
    let mut recode = Vec::with_capacity(levels.len());
    for l in levels {
        let to = target.get(l.as_str()).ok_or_else(|| {
            Error::InvalidArgument(format!("unmapped level {l:?} in column {:?}", map.column))
        })?;
        recode.push(coarse.iter().position(|c| c == to).unwrap() as u32);
    }
    let codes = ds.categorical(idx)?;
    let new_col = Column::Categorical(codes.iter().map(|&c| recode[c as usize]).collect());

    let mut specs = ds.schema().clone().into_columns();
    specs[idx].kind = ColumnKind::Categorical { levels: coarse };
    let mut columns = ds.columns().to_vec();
    columns[idx] = new_col;
    let missing = (0..ds.n_cols()).map(|c| ds.missing_rows(c).to_vec()).collect();
    Dataset::with_missing(Schema::new(specs)?, columns, missing)
}

/// First `n` rows, in order.
pub fn head_n(ds: &Dataset, n: usize) -> Result<Dataset> {
    if n > ds.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "head_n({n}) on a dataset of {} rows",
            ds.n_rows()
        )));
    }
    let rows: Vec<usize> = (0..n).collect();
    Ok(ds.select_rows(&rows))
}

pub fn drop_column(ds: &Dataset, name: &str) -> Result<Dataset> {
    let idx = ds.schema().index_of(name)?;
    if ds.n_cols() == 1 {
        return Err(Error::Schema("schema must be non-empty".into()));
    }
    let keep = |i: &usize| *i != idx;
    let specs: Vec<ColumnSpec> = ds
        .schema()
        .columns()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(i))
        .map(|(_, c)| c.clone())
        .collect();
    let columns = ds
        .columns()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(i))
        .map(|(_, c)| c.clone())
        .collect();
    let missing = (0..ds.n_cols())
        .filter(keep)
        .map(|c| ds.missing_rows(c).to_vec())
        .collect();
    Dataset::with_missing(Schema::new(specs)?, columns, missing)
}
