//! Scalar estimands computed per dataset, pooled across the m synthetic
//! datasets with the multiple-imputation combining rules, and turned into
//! normal-theory confidence intervals.

mod fitspec;

pub use fitspec::{parse_fit_specs, read_fit_specs, Family, FitSpec};

use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result, ResultExt};
use crate::fit::{self, DesignEncoding};

/// Variance rule used when pooling across datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Rule {
    /// `v̄ + b/m`; needs m ≥ 2.
    Tp,
    /// `(1 + 1/m)·v̄`.
    #[default]
    Ts,
}

/// Point and variance estimates of one estimand on each of m datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub id: String,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub n: usize,
}

impl EstimateSet {
    pub fn new(id: impl Into<String>, q: Vec<f64>, v: Vec<f64>, n: usize) -> Result<Self> {
        if q.is_empty() || q.len() != v.len() {
            return Err(Error::InvalidArgument(format!(
                "need equal, non-empty estimate lists (got {} and {})",
                q.len(),
                v.len()
            )));
        }
        if let Some(bad) = v.iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::InvalidArgument(format!("variance estimate {bad} is not >= 0")));
        }
        Ok(EstimateSet {
            id: id.into(),
            q,
            v,
            n,
        })
    }

    pub fn m(&self) -> usize {
        self.q.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedEstimate {
    pub m: usize,
    pub q_bar: f64,
    pub v_bar: f64,
    /// Between-dataset variance; `None` when m = 1.
    pub b: Option<f64>,
    pub t_p: Option<f64>,
    pub t_s: f64,
    pub rule: Rule,
}

impl CombinedEstimate {
    /// Total variance under the chosen rule.
    pub fn variance(&self) -> Result<f64> {
        match self.rule {
            Rule::Ts => Ok(self.t_s),
            Rule::Tp => self
                .t_p
                .ok_or_else(|| Error::InvalidArgument("Tp is undefined for m = 1".into())),
        }
    }
}

/// Sum taken in ascending order so the result does not depend on input order.
fn ordered_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

pub fn combine(es: &EstimateSet, rule: Rule) -> Result<CombinedEstimate> {
    let m = es.m();
    if rule == Rule::Tp && m < 2 {
        return Err(Error::InvalidArgument(
            "the Tp rule needs at least two synthetic datasets".into(),
        ));
    }
    let mf = m as f64;
    let q_bar = if es.q.iter().all(|q| *q == es.q[0]) {
        es.q[0]
    } else {
        ordered_sum(es.q.iter().copied()) / mf
    };
    let v_bar = ordered_sum(es.v.iter().copied()) / mf;
    let b = (m >= 2).then(|| ordered_sum(es.q.iter().map(|q| (q - q_bar).powi(2))) / (mf - 1.0));
    Ok(CombinedEstimate {
        m,
        q_bar,
        v_bar,
        b,
        t_p: b.map(|b| v_bar + b / mf),
        t_s: (1.0 + 1.0 / mf) * v_bar,
        rule,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub center: f64,
}

impl ConfidenceInterval {
    /// `center ± z·sqrt(variance)` with z the normal quantile for `level`.
    pub fn normal(center: f64, variance: f64, level: f64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidArgument(format!("level {level} is outside (0, 1)")));
        }
        if !(variance >= 0.0) || !center.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cannot build an interval around {center} with variance {variance}"
            )));
        }
        let half = critical_value(level) * variance.sqrt();
        Ok(ConfidenceInterval {
            lower: center - half,
            upper: center + half,
            level,
            center,
        })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Two-sided standard normal critical value for `level`.
pub fn critical_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

pub fn ci(ce: &CombinedEstimate, level: f64) -> Result<ConfidenceInterval> {
    ConfidenceInterval::normal(ce.q_bar, ce.variance()?, level)
}

/// Sample mean of a numeric column and its variance `s²/n`.
pub fn mean_point_estimand(ds: &Dataset, col: usize) -> Result<(f64, f64)> {
    let v = ds.numeric(col)?;
    let n = v.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "mean estimate of {:?} needs at least two rows",
            ds.schema().column(col).name
        )));
    }
    let nf = n as f64;
    let mean = v.iter().sum::<f64>() / nf;
    let s2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok((mean, s2 / nf))
}

/// One fitted coefficient with its squared standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientEstimate {
    pub name: String,
    pub q: f64,
    pub v: f64,
}

/// Coefficients of the model `fit` describes, fitted on `ds`. Multinomial
/// logistic coefficients are prefixed with their class label.
pub fn regression_estimands(ds: &Dataset, fit: &FitSpec) -> Result<Vec<CoefficientEstimate>> {
    regression_inner(ds, fit).context_with(|| format!("fit {:?}", fit.id))
}

fn regression_inner(ds: &Dataset, fit: &FitSpec) -> Result<Vec<CoefficientEstimate>> {
    let schema = ds.schema();
    let target = schema.index_of(&fit.target)?;
    let preds = fit
        .predictors
        .iter()
        .map(|p| schema.index_of(p))
        .collect::<Result<Vec<_>>>()?;
    if preds.contains(&target) {
        return Err(Error::Config(format!("{:?} is both target and predictor", fit.target)));
    }
    let features = fit::features(ds, &preds);
    let names: Vec<&str> = preds.iter().map(|&p| schema.column(p).name.as_str()).collect();
    let levels: Vec<Option<&[String]>> = preds.iter().map(|&p| schema.column(p).kind.levels()).collect();
    let terms = DesignEncoding::for_features(&features).term_names(&names, &levels);
    match fit.family {
        Family::Linear => {
            let model = fit::fit_ols(&features, ds.numeric(target)?)?;
            Ok(terms
                .into_iter()
                .zip(model.coefficients.iter().zip(&model.standard_errors))
                .map(|(name, (&q, &se))| CoefficientEstimate { name, q, v: se * se })
                .collect())
        }
        Family::Logistic => {
            let y = ds.categorical(target)?;
            let model = fit::fit_logistic(&features, y, fit::NewtonOptions::default())?;
            let target_levels = schema.column(target).kind.levels().unwrap_or(&[]);
            let binary = target_levels.len() == 2;
            let mut out = Vec::new();
            for (k, (coef, se)) in model.coefficients[1..].iter().zip(&model.standard_errors).enumerate() {
                let class = &target_levels[model.classes[k + 1] as usize];
                for ((term, &q), &s) in terms.iter().zip(coef).zip(se) {
                    let name = if binary { term.clone() } else { format!("{class}:{term}") };
                    out.push(CoefficientEstimate { name, q, v: s * s });
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, ColumnKind, ColumnSpec, Schema};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn combine_examples() {
        let es = EstimateSet::new("a", vec![2.0; 3], vec![1.0; 3], 10).unwrap();
        let c = combine(&es, Rule::Ts).unwrap();
        assert_eq!(c.q_bar, 2.0);
        assert!(close(c.t_s, 4.0 / 3.0, 1e-15));

        let es = EstimateSet::new("b", vec![1.0, 2.0, 3.0], vec![0.0; 3], 10).unwrap();
        let c = combine(&es, Rule::Tp).unwrap();
        assert_eq!(c.q_bar, 2.0);
        assert!(close(c.b.unwrap(), 1.0, 1e-15));
        assert!(close(c.t_p.unwrap(), 1.0 / 3.0, 1e-15));

        let one = EstimateSet::new("c", vec![5.0], vec![0.7], 10).unwrap();
        assert!(combine(&one, Rule::Tp).is_err());
        let c = combine(&one, Rule::Ts).unwrap();
        assert_eq!(c.t_s, 1.4);
        assert_eq!(c.b, None);
    }

    #[test]
    fn estimate_set_validation() {
        assert!(EstimateSet::new("x", vec![], vec![], 1).is_err());
        assert!(EstimateSet::new("x", vec![1.0], vec![1.0, 2.0], 1).is_err());
        assert!(EstimateSet::new("x", vec![1.0], vec![-1.0], 1).is_err());
        assert!(EstimateSet::new("x", vec![1.0], vec![f64::NAN], 1).is_err());
    }

    #[test]
    fn intervals() {
        let c = combine(&EstimateSet::new("z", vec![0.0], vec![0.5], 1).unwrap(), Rule::Ts).unwrap();
        let i = ci(&c, 0.95).unwrap();
        assert!(close(i.lower, -1.95996, 1e-4) && close(i.upper, 1.95996, 1e-4));
        let d = ConfidenceInterval::normal(3.0, 0.0, 0.95).unwrap();
        assert_eq!((d.lower, d.upper), (3.0, 3.0));
        assert!(ci(&c, 1.0).is_err());
        assert!(ci(&c, 0.0).is_err());
    }

    fn table(cols: Vec<(&str, Column)>) -> Dataset {
        let specs = cols
            .iter()
            .map(|(n, c)| ColumnSpec {
                name: n.to_string(),
                kind: match c {
                    Column::Numeric(_) => ColumnKind::Numeric,
                    Column::Categorical(_) => ColumnKind::categorical(["no", "yes"]).unwrap(),
                },
            })
            .collect();
        Dataset::new(Schema::new(specs).unwrap(), cols.into_iter().map(|(_, c)| c).collect()).unwrap()
    }

    #[test]
    fn mean_point() {
        let ds = table(vec![("x", Column::Numeric(vec![1.0, 2.0, 3.0])), ("k", Column::Numeric(vec![4.0; 3]))]);
        let (q, v) = mean_point_estimand(&ds, 0).unwrap();
        assert_eq!(q, 2.0);
        assert!(close(v, 1.0 / 3.0, 1e-15));
        assert_eq!(mean_point_estimand(&ds, 1).unwrap().1, 0.0);
        let single = table(vec![("x", Column::Numeric(vec![1.0]))]);
        assert!(mean_point_estimand(&single, 0).is_err());
    }

    #[test]
    fn noiseless_linear_fit() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let ds = table(vec![("x", Column::Numeric(x)), ("y", Column::Numeric(y))]);
        let fit = FitSpec::new("f", Family::Linear, "y", &["x"]);
        let est = regression_estimands(&ds, &fit).unwrap();
        assert_eq!(est[0].name, "(Intercept)");
        assert_eq!(est[1].name, "x");
        assert!(close(est[0].q, 3.0, 1e-9) && close(est[1].q, 2.0, 1e-9));
        assert!(est[0].v < 1e-12 && est[1].v < 1e-12);
        let bad = FitSpec::new("g", Family::Linear, "y", &["nope"]);
        assert!(regression_estimands(&ds, &bad).is_err());
    }
}
