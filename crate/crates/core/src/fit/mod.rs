//! Models fitted per variable during synthesis: CART trees with leaf
//! donors, OLS linear regression, multinomial logistic regression and
//! saturated joint tables over categorical variables.

mod cart;
mod design;
mod joint;
mod linalg;
mod logistic;
mod ols;

pub use cart::{draw_leaf, fit_cart, CartParams, CartTree, Node, SplitRule};
pub use design::{DesignEncoding, Term};
pub use joint::{fit_joint_table, JointTable};
pub use logistic::{draw_class, fit_logistic, LogisticModel, NewtonOptions};
pub use ols::{draw_linear, fit_ols, LinearModel};

use rand::Rng;

use crate::data::{Column, Dataset, Value};
use crate::error::{Error, Result};

/// A borrowed predictor column.
#[derive(Debug, Clone, Copy)]
pub enum Feature<'a> {
    Numeric(&'a [f64]),
    Categorical { codes: &'a [u32], n_levels: usize },
}

impl<'a> Feature<'a> {
    pub fn len(&self) -> usize {
        match self {
            Feature::Numeric(v) => v.len(),
            Feature::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, row: usize) -> Value {
        match self {
            Feature::Numeric(v) => Value::Num(v[row]),
            Feature::Categorical { codes, .. } => Value::Cat(codes[row]),
        }
    }

    /// `None` for numeric, `Some(level count)` for categorical.
    pub fn layout(&self) -> Option<usize> {
        match self {
            Feature::Numeric(_) => None,
            Feature::Categorical { n_levels, .. } => Some(*n_levels),
        }
    }

    pub fn from_dataset(ds: &'a Dataset, col: usize) -> Feature<'a> {
        match ds.column(col) {
            Column::Numeric(v) => Feature::Numeric(v),
            Column::Categorical(codes) => Feature::Categorical {
                codes,
                n_levels: ds.schema().column(col).kind.n_levels().unwrap_or(0),
            },
        }
    }
}

/// Predictor columns of `ds` in the given order.
pub fn features<'a>(ds: &'a Dataset, cols: &[usize]) -> Vec<Feature<'a>> {
    cols.iter().map(|&c| Feature::from_dataset(ds, c)).collect()
}

/// Gather row `row` of the given features.
pub fn row_values(features: &[Feature<'_>], row: usize) -> Vec<Value> {
    features.iter().map(|f| f.value(row)).collect()
}

pub(crate) fn check_row(layout: &[Option<usize>], row: &[Value]) -> Result<()> {
    if layout.len() != row.len() {
        return Err(Error::Layout(format!(
            "expected {} predictor values, got {}",
            layout.len(),
            row.len()
        )));
    }
    for (i, (kind, v)) in layout.iter().zip(row).enumerate() {
        match (kind, v) {
            (None, Value::Num(_)) => {}
            (Some(n), Value::Cat(c)) if (*c as usize) < *n => {}
            (Some(n), Value::Cat(c)) => {
                return Err(Error::Layout(format!(
                    "predictor {i}: level {c} out of range for {n} levels"
                )))
            }
            _ => return Err(Error::Layout(format!("predictor {i}: kind mismatch"))),
        }
    }
    Ok(())
}

pub(crate) fn check_equal_rows(features: &[Feature<'_>], n: usize) -> Result<()> {
    if let Some(f) = features.iter().find(|f| f.len() != n) {
        return Err(Error::Fit(format!(
            "predictor has {} rows but target has {n}",
            f.len()
        )));
    }
    Ok(())
}

/// Draw an index from a probability vector. Vectors whose sum is off by at
/// most 1e-9 are renormalised; larger drift is an error.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid probability vector {probs:?}"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    // u landed in the rounding gap at the top; take the last positive entry
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1))
}
