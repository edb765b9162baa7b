use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::pmm::PmmDonorPool;
use super::spec::{Method, SynthesizerSpec};
use crate::data::{Column, Dataset, Value};
use crate::error::{Error, Result, ResultExt};
use crate::fit::{self, Feature};
use crate::rng;

/// Stream index reserved for the bootstrap draw; variable streams use the
/// column index.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// The m synthetic datasets of one synthesizer run.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub label: String,
    pub seed: u64,
    pub datasets: Vec<Dataset>,
    /// Wall-clock seconds spent generating each dataset.
    pub seconds: Vec<f64>,
}

impl SyntheticSet {
    pub fn m(&self) -> usize {
        self.datasets.len()
    }

    pub fn total_seconds(&self) -> f64 {
        self.seconds.iter().sum()
    }
}

/// With-replacement resample of `0..n` used as the fitting set of a proper
/// synthesizer.
pub fn bootstrap_rows(n: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut r = rng::stream(seed, &[index as u64, BOOTSTRAP_STREAM]);
    (0..n).map(|_| r.random_range(0..n)).collect()
}

/// Generate all m datasets, in parallel on the current rayon pool.
pub fn synthesize(original: &Dataset, spec: &SynthesizerSpec) -> Result<SyntheticSet> {
    original.ensure_complete()?;
    if original.schema().len() != spec.methods().len() {
        return Err(Error::Spec("synthesizer was built for a different schema".into()));
    }
    let results: Vec<(Dataset, f64)> = (0..spec.m())
        .into_par_iter()
        .map(|i| {
            let start = Instant::now();
            let ds = synthesize_one(original, spec, i)?;
            Ok((ds, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let (datasets, seconds) = results.into_iter().unzip();
    Ok(SyntheticSet {
        label: spec.label().to_string(),
        seed: spec.seed(),
        datasets,
        seconds,
    })
}

/// Dataset `index` of the run, drawing its own bootstrap when proper.
pub fn synthesize_one(original: &Dataset, spec: &SynthesizerSpec, index: usize) -> Result<Dataset> {
    if spec.proper() {
        let rows = bootstrap_rows(original.n_rows(), spec.seed(), index);
        synthesize_from_rows(original, spec, index, &rows)
    } else {
        let rows: Vec<usize> = (0..original.n_rows()).collect();
        synthesize_from_rows(original, spec, index, &rows)
    }
}

/// Dataset `index` of the run, fitted on the given rows of `original`.
pub fn synthesize_from_rows(
    original: &Dataset,
    spec: &SynthesizerSpec,
    index: usize,
    fitting_rows: &[usize],
) -> Result<Dataset> {
    original.ensure_complete()?;
    if fitting_rows.is_empty() {
        return Err(Error::InvalidArgument("fitting set is empty".into()));
    }
    if let Some(&bad) = fitting_rows.iter().find(|&&r| r >= original.n_rows()) {
        return Err(Error::InvalidArgument(format!("fitting row {bad} out of range")));
    }
    let fitting = original.select_rows(fitting_rows);
    let schema = original.schema();
    let n = original.n_rows();
    let mut out: Vec<Option<Column>> = vec![None; schema.len()];

    for &c in spec.visit().as_slice() {
        if out[c].is_some() {
            continue;
        }
        let name = &schema.column(c).name;
        let mut r = rng::stream(spec.seed(), &[index as u64, c as u64]);
        let context = || format!("synthesizing column {name:?} of dataset {index}");
        if spec.methods()[c] == Method::CatallGroup {
            let group = spec.catall_group();
            let table = fit::fit_joint_table(&fitting, &group).context_with(context)?;
            let mut cols = vec![Vec::with_capacity(n); group.len()];
            for _ in 0..n {
                for (col, &level) in cols.iter_mut().zip(table.draw(&mut r)) {
                    col.push(level);
                }
            }
            for (&g, col) in group.iter().zip(cols) {
                out[g] = Some(Column::Categorical(col));
            }
            continue;
        }
        let preds = spec.predictors().row(c);
        let method = if preds.is_empty() {
            Method::Sample
        } else {
            spec.methods()[c]
        };
        let column = synthesize_column(&fitting, c, method, &preds, &out, n, spec, &mut r)
            .context_with(context)?;
        out[c] = Some(column);
    }

    let columns = out
        .into_iter()
        .map(|c| c.expect("every column is visited"))
        .collect();
    Dataset::new(schema.clone(), columns)
}

#[allow(clippy::too_many_arguments)]
fn synthesize_column<R: Rng + ?Sized>(
    fitting: &Dataset,
    target: usize,
    method: Method,
    preds: &[usize],
    out: &[Option<Column>],
    n: usize,
    spec: &SynthesizerSpec,
    r: &mut R,
) -> Result<Column> {
    let params = spec.params();
    let fit_x = fit::features(fitting, preds);
    let syn_x: Vec<Feature<'_>> = preds
        .iter()
        .map(|&p| synthetic_feature(fitting, p, out))
        .collect();
    let mut row = Vec::with_capacity(preds.len());
    let fill = |i: usize, row: &mut Vec<Value>| {
        row.clear();
        row.extend(syn_x.iter().map(|f| f.value(i)));
    };
    let n_fit = fitting.n_rows();
    let column = match method {
        Method::Sample => match fitting.column(target) {
            Column::Numeric(v) => Column::Numeric((0..n).map(|_| v[r.random_range(0..n_fit)]).collect()),
            Column::Categorical(v) => {
                Column::Categorical((0..n).map(|_| v[r.random_range(0..n_fit)]).collect())
            }
        },
        Method::Cart => {
            let y = Feature::from_dataset(fitting, target);
            let tree = fit::fit_cart(&fit_x, y, params.cart)?;
            let mut values = Vec::with_capacity(n);
            for i in 0..n {
                fill(i, &mut row);
                values.push(fit::draw_leaf(&tree, &row, y, r)?);
            }
            match y {
                Feature::Numeric(_) => Column::Numeric(values.into_iter().filter_map(Value::num).collect()),
                Feature::Categorical { .. } => {
                    Column::Categorical(values.into_iter().filter_map(Value::cat).collect())
                }
            }
        }
        Method::ParametricNumeric => {
            let model = fit::fit_ols(&fit_x, fitting.numeric(target)?)?;
            let mut values = Vec::with_capacity(n);
            for i in 0..n {
                fill(i, &mut row);
                values.push(fit::draw_linear(&model, &row, r)?);
            }
            Column::Numeric(values)
        }
        Method::ParametricCategorical => {
            let model = fit::fit_logistic(&fit_x, fitting.categorical(target)?, params.newton)?;
            let mut values = Vec::with_capacity(n);
            for i in 0..n {
                fill(i, &mut row);
                values.push(fit::draw_class(&model, &row, r)?);
            }
            Column::Categorical(values)
        }
        Method::Pmm => {
            let y = fitting.numeric(target)?;
            if y.len() < params.k_donors {
                return Err(Error::InvalidArgument(format!(
                    "fitting set has {} rows, fewer than {} donors",
                    y.len(),
                    params.k_donors
                )));
            }
            let model = fit::fit_ols(&fit_x, y)?;
            let pool = PmmDonorPool::new(&model.predict_all(&fit_x), y)?;
            let mut values = Vec::with_capacity(n);
            for i in 0..n {
                fill(i, &mut row);
                values.push(pool.draw(model.predict(&row)?, params.k_donors, r)?);
            }
            Column::Numeric(values)
        }
        Method::CatallGroup => unreachable!("catall columns are drawn as a group"),
    };
    Ok(column)
}

fn synthetic_feature<'a>(fitting: &Dataset, col: usize, out: &'a [Option<Column>]) -> Feature<'a> {
    match out[col].as_ref().expect("predictors are visited first") {
        Column::Numeric(v) => Feature::Numeric(v),
        Column::Categorical(codes) => Feature::Categorical {
            codes,
            n_levels: fitting.schema().column(col).kind.n_levels().unwrap_or(0),
        },
    }
}
