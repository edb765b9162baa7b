//! Analysis-accuracy checks: does a classifier trained on synthetic data
//! behave like one trained on the original, do ad-hoc tabulations match,
//! and how do these deviations correlate with the utility metrics.

mod adhoc;
mod correlation;

pub use adhoc::{
    adhoc_proportion, adhoc_results, parse_adhoc_specs, read_adhoc_specs, AdhocResult, AdhocSpec, Condition, Op,
    Operand, Predicate,
};
pub use correlation::{
    correlation_battery, default_pairs, pearson, series_from_report, BatteryEntry, CorrelationResult,
};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::{Dataset, Value};
use crate::error::{Error, Result};
use crate::fit::{self, CartParams, CartTree, Feature};
use crate::rng;
use crate::synth::SyntheticSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub cart: CartParams,
    /// Fraction of original rows held out for evaluation; `None` trains the
    /// original model and evaluates every model on all original rows.
    pub holdout: Option<f64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            cart: CartParams::default(),
            holdout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub spec_label: String,
    /// Accuracy on the original data of the model trained on each synthetic dataset.
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub baseline_accuracy: f64,
    /// Mean share of records on which the synthetic and original models are
    /// both right or both wrong.
    pub agreement: f64,
}

impl ClassificationResult {
    /// `|baseline − mean synthetic accuracy|`.
    pub fn deviation(&self) -> f64 {
        (self.baseline_accuracy - self.mean_accuracy).abs()
    }
}

/// CART classifier predicting the majority training class of a leaf.
struct Classifier {
    tree: CartTree,
    leaf_class: Vec<u32>,
}

impl Classifier {
    fn train(ds: &Dataset, target: usize, preds: &[usize], params: CartParams) -> Result<Self> {
        let y = ds.categorical(target)?;
        let n_levels = ds.schema().column(target).kind.n_levels().unwrap_or(0);
        let tree = fit::fit_cart(
            &fit::features(ds, preds),
            Feature::Categorical { codes: y, n_levels },
            params,
        )?;
        let leaf_class = tree
            .nodes()
            .iter()
            .map(|node| match node {
                fit::Node::Leaf { donors } => {
                    let mut counts = vec![0usize; n_levels];
                    for &d in donors {
                        counts[y[d] as usize] += 1;
                    }
                    // first level wins ties
                    let best = counts.iter().copied().max().unwrap_or(0);
                    counts.iter().position(|&c| c == best).unwrap_or(0) as u32
                }
                fit::Node::Split { .. } => 0,
            })
            .collect();
        Ok(Classifier { tree, leaf_class })
    }

    fn predict(&self, row: &[Value]) -> Result<u32> {
        Ok(self.leaf_class[self.tree.leaf_of(row)?])
    }

    /// Per-row correctness on `rows` of `ds`.
    fn correct(&self, ds: &Dataset, target: usize, preds: &[usize], rows: &[usize]) -> Result<Vec<bool>> {
        let feats = fit::features(ds, preds);
        let y = ds.categorical(target)?;
        rows.iter()
            .map(|&i| Ok(self.predict(&fit::row_values(&feats, i))? == y[i]))
            .collect()
    }
}

fn share(flags: impl Iterator<Item = bool>, n: usize) -> f64 {
    flags.filter(|&b| b).count() as f64 / n as f64
}

/// Train on each synthetic dataset and on the original, evaluate on the
/// original, and compare.
pub fn classify_compare(
    original: &Dataset,
    syn: &SyntheticSet,
    target: &str,
    seed: u64,
    opts: &ClassifyOptions,
) -> Result<ClassificationResult> {
    let schema = original.schema();
    let t = schema.index_of(target)?;
    if schema.column(t).kind.is_numeric() {
        return Err(Error::KindMismatch {
            column: target.to_string(),
            expected: "categorical",
            found: "numeric",
        });
    }
    if syn.datasets.is_empty() {
        return Err(Error::InvalidArgument("no synthetic datasets to compare".into()));
    }
    if let Some(ds) = syn.datasets.iter().find(|d| d.schema() != schema) {
        return Err(Error::Schema(format!(
            "synthetic dataset has columns {:?}",
            ds.schema().names().collect::<Vec<_>>()
        )));
    }
    let preds: Vec<usize> = (0..schema.len()).filter(|&c| c != t).collect();
    let n = original.n_rows();
    let (train_rows, eval_rows): (Vec<usize>, Vec<usize>) = match opts.holdout {
        None => ((0..n).collect(), (0..n).collect()),
        Some(frac) => {
            if !(frac > 0.0 && frac < 1.0) {
                return Err(Error::InvalidArgument(format!("holdout fraction {frac} is outside (0, 1)")));
            }
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(&mut rng::stream(seed, &[]));
            let cut = ((n as f64) * frac).round() as usize;
            let (test, train) = rows.split_at(cut.clamp(1, n.saturating_sub(1)));
            let mut train = train.to_vec();
            let mut test = test.to_vec();
            train.sort_unstable();
            test.sort_unstable();
            (train, test)
        }
    };
    let base_train = if train_rows.len() == n {
        original.clone()
    } else {
        original.select_rows(&train_rows)
    };
    let base = Classifier::train(&base_train, t, &preds, opts.cart)?;
    let base_correct = base.correct(original, t, &preds, &eval_rows)?;
    let n_eval = eval_rows.len();
    let per_set: Vec<(f64, f64)> = syn
        .datasets
        .par_iter()
        .enumerate()
        .map(|(i, ds)| {
            let model = Classifier::train(ds, t, &preds, opts.cart)
                .map_err(|e| e.context(format!("classifier on synthetic dataset {i}")))?;
            let correct = model.correct(original, t, &preds, &eval_rows)?;
            let acc = share(correct.iter().copied(), n_eval);
            let agree = share(correct.iter().zip(&base_correct).map(|(a, b)| a == b), n_eval);
            Ok((acc, agree))
        })
        .collect::<Result<_>>()?;
    let m = per_set.len() as f64;
    let accuracies: Vec<f64> = per_set.iter().map(|p| p.0).collect();
    Ok(ClassificationResult {
        spec_label: syn.label.clone(),
        mean_accuracy: accuracies.iter().sum::<f64>() / m,
        agreement: per_set.iter().map(|p| p.1).sum::<f64>() / m,
        baseline_accuracy: share(base_correct.iter().copied(), n_eval),
        accuracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::label_fixture;

    fn copies(ds: &Dataset, m: usize) -> SyntheticSet {
        SyntheticSet {
            label: "copy".into(),
            seed: 0,
            datasets: vec![ds.clone(); m],
            seconds: vec![0.0; m],
        }
    }

    #[test]
    fn copies_agree_with_the_original() {
        let ds = label_fixture(400, 1);
        let r = classify_compare(&ds, &copies(&ds, 3), "label", 0, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.agreement, 1.0);
        assert_eq!(r.mean_accuracy, r.baseline_accuracy);
        assert_eq!(r.deviation(), 0.0);
        assert!(r.baseline_accuracy > 0.95);
    }

    #[test]
    fn holdout_mode() {
        let ds = label_fixture(400, 2);
        let opts = ClassifyOptions { holdout: Some(0.25), ..ClassifyOptions::default() };
        let a = classify_compare(&ds, &copies(&ds, 2), "label", 5, &opts).unwrap();
        let b = classify_compare(&ds, &copies(&ds, 2), "label", 5, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.baseline_accuracy > 0.9);
        let bad = ClassifyOptions { holdout: Some(1.0), ..ClassifyOptions::default() };
        assert!(classify_compare(&ds, &copies(&ds, 2), "label", 5, &bad).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = label_fixture(50, 3);
        let o = ClassifyOptions::default();
        assert!(classify_compare(&ds, &copies(&ds, 0), "label", 0, &o).is_err());
        assert!(classify_compare(&ds, &copies(&ds, 1), "signal", 0, &o).is_err());
        assert!(classify_compare(&ds, &copies(&ds, 1), "nope", 0, &o).is_err());
    }
}
