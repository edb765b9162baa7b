use std::collections::BTreeMap;

use rand::Rng;

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};

/// Saturated contingency table over categorical columns. Only observed
/// level combinations are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    vars: Vec<usize>,
    cells: Vec<(Vec<u32>, u64)>,
    cumulative: Vec<u64>,
    total: u64,
}

impl JointTable {
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Observed cells in lexicographic order of their level tuples.
    pub fn cells(&self) -> &[(Vec<u32>, u64)] {
        &self.cells
    }

    pub fn count(&self, tuple: &[u32]) -> u64 {
        self.cells
            .binary_search_by(|(t, _)| t.as_slice().cmp(tuple))
            .map_or(0, |i| self.cells[i].1)
    }

    /// Draw a level tuple with probability proportional to its count.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> &[u32] {
        let u = rng.random_range(0..self.total);
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.cells[i].0
    }
}

pub fn fit_joint_table(ds: &Dataset, vars: &[usize]) -> Result<JointTable> {
    if vars.is_empty() {
        return Err(Error::InvalidArgument("joint table needs at least one variable".into()));
    }
    if ds.n_rows() == 0 {
        return Err(Error::Fit("joint table on empty data".into()));
    }
    let mut cols = Vec::with_capacity(vars.len());
    for &v in vars {
        if !matches!(ds.schema().column(v).kind, ColumnKind::Categorical { .. }) {
            return Err(Error::KindMismatch {
                column: ds.schema().column(v).name.clone(),
                expected: "categorical",
                found: "numeric",
            });
        }
        cols.push(ds.categorical(v)?);
    }
    let mut map: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    for row in 0..ds.n_rows() {
        *map.entry(cols.iter().map(|c| c[row]).collect()).or_default() += 1;
    }
    let cells: Vec<(Vec<u32>, u64)> = map.into_iter().collect();
    let mut acc = 0;
    let cumulative = cells
        .iter()
        .map(|(_, c)| {
            acc += c;
            acc
        })
        .collect();
    Ok(JointTable {
        vars: vars.to_vec(),
        cells,
        cumulative,
        total: acc,
    })
}
