use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KlDirection {
    /// D(original ‖ synthetic).
    #[default]
    OrigSyn,
    /// D(synthetic ‖ original).
    SynOrig,
    /// Average of both directions.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlOptions {
    /// Equal-width bins for numeric columns.
    pub bins: usize,
    /// Pseudo-count added to every cell; `None` disables smoothing.
    pub smoothing: Option<f64>,
    pub direction: KlDirection,
}

impl Default for KlOptions {
    fn default() -> Self {
        KlOptions {
            bins: 20,
            smoothing: Some(0.5),
            direction: KlDirection::OrigSyn,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlScore {
    pub variable: String,
    /// Divergence in nats.
    pub raw: f64,
    pub normalized: Option<f64>,
    pub direction: KlDirection,
}

/// Divergence between the distributions of two columns of the same kind.
pub fn kl_divergence(orig: &Column, syn: &Column, kind: &ColumnKind, opts: &KlOptions) -> Result<f64> {
    if orig.is_empty() || syn.is_empty() {
        return Err(Error::InvalidArgument("KL divergence of an empty column".into()));
    }
    let (p, q) = match (kind, orig, syn) {
        (ColumnKind::Categorical { levels }, Column::Categorical(a), Column::Categorical(b)) => {
            let mut ca = vec![0.0; levels.len()];
            let mut cb = vec![0.0; levels.len()];
            for &v in a {
                ca[v as usize] += 1.0;
            }
            for &v in b {
                cb[v as usize] += 1.0;
            }
            // keep only levels seen in either column
            let keep: Vec<usize> = (0..levels.len()).filter(|&i| ca[i] + cb[i] > 0.0).collect();
            (
                keep.iter().map(|&i| ca[i]).collect::<Vec<_>>(),
                keep.iter().map(|&i| cb[i]).collect::<Vec<_>>(),
            )
        }
        (ColumnKind::Numeric, Column::Numeric(a), Column::Numeric(b)) => {
            if opts.bins < 2 {
                return Err(Error::InvalidArgument(format!("{} bins; need at least 2", opts.bins)));
            }
            let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
            let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
            (histogram(a, lo, hi, opts.bins), histogram(b, lo, hi, opts.bins))
        }
        _ => {
            return Err(Error::KindMismatch {
                column: String::new(),
                expected: kind.name(),
                found: if orig.as_numeric().is_some() { "numeric" } else { "categorical" },
            })
        }
    };
    let p = normalize(p, opts.smoothing);
    let q = normalize(q, opts.smoothing);
    Ok(match opts.direction {
        KlDirection::OrigSyn => divergence(&p, &q),
        KlDirection::SynOrig => divergence(&q, &p),
        KlDirection::Symmetric => 0.5 * (divergence(&p, &q) + divergence(&q, &p)),
    })
}

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    let width = hi - lo;
    for &v in values {
        let i = if width > 0.0 {
            (((v - lo) / width * bins as f64).floor() as usize).min(bins - 1)
        } else {
            0
        };
        counts[i] += 1.0;
    }
    counts
}

fn normalize(mut counts: Vec<f64>, smoothing: Option<f64>) -> Vec<f64> {
    if let Some(a) = smoothing {
        counts.iter_mut().for_each(|c| *c += a);
    }
    let total: f64 = counts.iter().sum();
    counts.iter_mut().for_each(|c| *c /= total);
    counts
}

fn divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

/// One score per column of the two datasets.
pub fn kl_scores(orig: &Dataset, syn: &Dataset, opts: &KlOptions) -> Result<Vec<KlScore>> {
    if orig.schema() != syn.schema() {
        return Err(Error::Schema("KL needs datasets with the same schema".into()));
    }
    orig.schema()
        .columns()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(KlScore {
                variable: c.name.clone(),
                raw: kl_divergence(orig.column(i), syn.column(i), &c.kind, opts)
                    .map_err(|e| e.context(format!("KL of column {:?}", c.name)))?,
                normalized: None,
                direction: opts.direction,
            })
        })
        .collect()
}

/// Divide each score by the Sample synthesizer's score for the same
/// variable; returns the normalized scores and their average.
pub fn normalize_kl(scores: &[KlScore], baseline: &[KlScore]) -> Result<(Vec<KlScore>, f64)> {
    if scores.is_empty() || scores.len() != baseline.len() {
        return Err(Error::InvalidArgument("KL scores and baseline do not cover the same variables".into()));
    }
    let mut out = Vec::with_capacity(scores.len());
    for (s, b) in scores.iter().zip(baseline) {
        if s.variable != b.variable {
            return Err(Error::InvalidArgument(format!(
                "KL baseline variable {:?} does not match {:?}",
                b.variable, s.variable
            )));
        }
        if !(b.raw > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "KL baseline for {:?} is zero; cannot normalize",
                b.variable
            )));
        }
        out.push(KlScore {
            normalized: Some(s.raw / b.raw),
            ..s.clone()
        });
    }
    let avg = out.iter().filter_map(|s| s.normalized).sum::<f64>() / out.len() as f64;
    Ok((out, avg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat2() -> ColumnKind {
        ColumnKind::categorical(["a", "b"]).unwrap()
    }

    #[test]
    fn hand_computed_categorical() {
        let p = Column::Categorical(vec![0, 1, 0, 1]);
        let q = Column::Categorical(vec![0, 1, 1, 1]);
        let opts = KlOptions { smoothing: None, ..KlOptions::default() };
        let got = kl_divergence(&p, &q, &cat2(), &opts).unwrap();
        let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn identical_columns_score_zero() {
        let c = Column::Numeric(vec![1.0, 2.0, 2.5, 7.0, -3.0]);
        assert!(kl_divergence(&c, &c, &ColumnKind::Numeric, &KlOptions::default()).unwrap() <= 1e-12);
        let k = Column::Categorical(vec![0, 1, 1]);
        assert!(kl_divergence(&k, &k, &cat2(), &KlOptions::default()).unwrap() <= 1e-12);
    }

    #[test]
    fn smoothing_keeps_missing_levels_finite() {
        let p = Column::Categorical(vec![0, 1, 1]);
        let q = Column::Categorical(vec![1, 1, 1]);
        let smooth = kl_divergence(&p, &q, &cat2(), &KlOptions::default()).unwrap();
        assert!(smooth.is_finite() && smooth > 0.0);
        let raw = kl_divergence(&p, &q, &cat2(), &KlOptions { smoothing: None, ..KlOptions::default() }).unwrap();
        assert!(raw.is_infinite());
    }

    #[test]
    fn symmetric_is_average() {
        let p = Column::Numeric(vec![0.0, 1.0, 1.0, 2.0, 5.0]);
        let q = Column::Numeric(vec![0.0, 0.0, 3.0, 4.0, 4.5]);
        let o = KlOptions::default();
        let a = kl_divergence(&p, &q, &ColumnKind::Numeric, &o).unwrap();
        let b = kl_divergence(&p, &q, &ColumnKind::Numeric, &KlOptions { direction: KlDirection::SynOrig, ..o }).unwrap();
        let s = kl_divergence(&p, &q, &ColumnKind::Numeric, &KlOptions { direction: KlDirection::Symmetric, ..o }).unwrap();
        assert!((s - 0.5 * (a + b)).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        let c = Column::Numeric(vec![1.0]);
        let e = Column::Numeric(vec![]);
        assert!(kl_divergence(&c, &e, &ColumnKind::Numeric, &KlOptions::default()).is_err());
        let one_bin = KlOptions { bins: 1, ..KlOptions::default() };
        assert!(kl_divergence(&c, &c, &ColumnKind::Numeric, &one_bin).is_err());
        assert!(kl_divergence(&c, &Column::Categorical(vec![0]), &ColumnKind::Numeric, &KlOptions::default()).is_err());
    }

    fn score(v: &str, raw: f64) -> KlScore {
        KlScore { variable: v.into(), raw, normalized: None, direction: KlDirection::OrigSyn }
    }

    #[test]
    fn normalization() {
        let base = [score("x", 0.4), score("y", 0.2)];
        let (_, avg) = normalize_kl(&base, &base).unwrap();
        assert_eq!(avg, 1.0);
        let half = [score("x", 0.2), score("y", 0.1)];
        assert_eq!(normalize_kl(&half, &base).unwrap().1, 0.5);
        assert!(normalize_kl(&half, &[score("x", 0.4), score("y", 0.0)]).is_err());
        assert!(normalize_kl(&half, &[score("y", 0.4), score("x", 0.1)]).is_err());
    }
}
