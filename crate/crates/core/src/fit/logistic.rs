//! Multinomial logistic regression by Newton's method on the softmax
//! log-likelihood, with the first observed class as the zeroed reference.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::linalg::factor_with_ridge;
use super::{check_equal_rows, sample_categorical, DesignEncoding, Feature};
use crate::data::Value;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Convergence when the largest absolute score component is below this.
    pub tol: f64,
    /// Coefficients are clamped to ±coef_cap; hitting the cap flags separation.
    pub coef_cap: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 50,
            tol: 1e-8,
            coef_cap: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub encoding: DesignEncoding,
    /// Class codes the model can emit, sorted; `classes[0]` is the reference.
    pub classes: Vec<u32>,
    /// One coefficient vector per entry of `classes`; the first is all zeros.
    pub coefficients: Vec<Vec<f64>>,
    /// Standard errors for the non-reference classes (`classes[1..]`).
    pub standard_errors: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    /// Some coefficient hit the cap (likely separation).
    pub separated: bool,
    /// A ridge was needed to invert the information matrix.
    pub ridge: bool,
    pub log_likelihood: f64,
}

impl LogisticModel {
    /// Model with given coefficients and no fitting history.
    pub fn from_coefficients(
        encoding: DesignEncoding,
        classes: Vec<u32>,
        coefficients: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if classes.len() < 2 || coefficients.len() != classes.len() {
            return Err(Error::InvalidArgument(
                "need at least two classes with one coefficient vector each".into(),
            ));
        }
        if coefficients.iter().any(|c| c.len() != encoding.width()) {
            return Err(Error::InvalidArgument("coefficient width mismatch".into()));
        }
        let p = encoding.width();
        Ok(LogisticModel {
            encoding,
            standard_errors: vec![vec![0.0; p]; classes.len() - 1],
            classes,
            coefficients,
            converged: true,
            iterations: 0,
            separated: false,
            ridge: false,
            log_likelihood: f64::NAN,
        })
    }

    /// Softmax probabilities over `classes` at an already-encoded row.
    pub fn probabilities_encoded(&self, x: &[f64]) -> Vec<f64> {
        let eta: Vec<f64> = self
            .coefficients
            .iter()
            .map(|b| b.iter().zip(x).map(|(a, c)| a * c).sum())
            .collect();
        softmax(&eta)
    }

    pub fn probabilities(&self, x_row: &[Value]) -> Result<Vec<f64>> {
        Ok(self.probabilities_encoded(&self.encoding.encode_row(x_row)?))
    }

    /// Flattened coefficients of the non-reference classes.
    pub fn parameters(&self) -> Vec<f64> {
        self.coefficients[1..].iter().flatten().copied().collect()
    }

    fn problem_for(&self, features: &[Feature<'_>], y: &[u32], theta: &[f64]) -> Result<Problem> {
        check_equal_rows(features, y.len())?;
        if features.iter().map(Feature::layout).ne(self.encoding.layout().iter().copied()) {
            return Err(Error::Layout("features do not match the model's predictors".into()));
        }
        if theta.len() != self.parameters().len() {
            return Err(Error::InvalidArgument(format!(
                "{} parameters given, model has {}",
                theta.len(),
                self.parameters().len()
            )));
        }
        let y = y
            .iter()
            .map(|c| {
                self.classes
                    .binary_search(c)
                    .map_err(|_| Error::InvalidArgument(format!("class {c} is not in the model")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Problem {
            x: self.encoding.matrix(features),
            y,
            k: self.classes.len(),
        })
    }

    /// Log-likelihood of `y` at the flattened parameters `theta` (layout of
    /// [`LogisticModel::parameters`]).
    pub fn log_likelihood_at(&self, features: &[Feature<'_>], y: &[u32], theta: &[f64]) -> Result<f64> {
        Ok(self.problem_for(features, y, theta)?.log_likelihood(theta))
    }

    /// Analytic gradient of [`LogisticModel::log_likelihood_at`].
    pub fn score_at(&self, features: &[Feature<'_>], y: &[u32], theta: &[f64]) -> Result<Vec<f64>> {
        let (g, _) = self.problem_for(features, y, theta)?.score_and_information(theta);
        Ok(g.iter().copied().collect())
    }
}

fn softmax(eta: &[f64]) -> Vec<f64> {
    let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = eta.iter().map(|e| (e - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// The data of a multinomial problem in encoded form, with targets mapped
/// to positions in the observed class list.
pub(crate) struct Problem {
    pub x: DMatrix<f64>,
    pub y: Vec<usize>,
    pub k: usize,
}

impl Problem {
    fn p(&self) -> usize {
        self.x.ncols()
    }

    fn eta_probs(&self, theta: &[f64], i: usize) -> Vec<f64> {
        let p = self.p();
        let mut eta = vec![0.0; self.k];
        for (c, e) in eta.iter_mut().enumerate().skip(1) {
            let b = &theta[(c - 1) * p..c * p];
            *e = (0..p).map(|j| self.x[(i, j)] * b[j]).sum();
        }
        eta
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        (0..self.x.nrows())
            .map(|i| {
                let eta = self.eta_probs(theta, i);
                let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + eta.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
                eta[self.y[i]] - lse
            })
            .sum()
    }

    /// Score vector and observed information (negative Hessian).
    pub fn score_and_information(&self, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.p();
        let d = (self.k - 1) * p;
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        for i in 0..self.x.nrows() {
            let pi = softmax(&self.eta_probs(theta, i));
            let xi: Vec<f64> = (0..p).map(|j| self.x[(i, j)]).collect();
            for a in 1..self.k {
                let resid = f64::from(u8::from(self.y[i] == a)) - pi[a];
                for j in 0..p {
                    g[(a - 1) * p + j] += xi[j] * resid;
                }
                for b in a..self.k {
                    let w = pi[a] * (f64::from(u8::from(a == b)) - pi[b]);
                    if w == 0.0 {
                        continue;
                    }
                    for j in 0..p {
                        let wj = w * xi[j];
                        for l in 0..p {
                            h[((a - 1) * p + j, (b - 1) * p + l)] += wj * xi[l];
                        }
                    }
                }
            }
        }
        // fill the lower block triangle
        for a in 1..self.k {
            for b in (a + 1)..self.k {
                for j in 0..p {
                    for l in 0..p {
                        h[((b - 1) * p + l, (a - 1) * p + j)] = h[((a - 1) * p + j, (b - 1) * p + l)];
                    }
                }
            }
        }
        (g, h)
    }
}

pub(crate) fn build_problem(
    features: &[Feature<'_>],
    y: &[u32],
    encoding: &DesignEncoding,
) -> (Problem, Vec<u32>) {
    let mut classes: Vec<u32> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let pos: Vec<usize> = y
        .iter()
        .map(|c| classes.binary_search(c).expect("class collected above"))
        .collect();
    (
        Problem {
            x: encoding.matrix(features),
            y: pos,
            k: classes.len(),
        },
        classes,
    )
}

pub fn fit_logistic(
    features: &[Feature<'_>],
    y: &[u32],
    opts: NewtonOptions,
) -> Result<LogisticModel> {
    check_equal_rows(features, y.len())?;
    if y.is_empty() {
        return Err(Error::Fit("empty data".into()));
    }
    let encoding = DesignEncoding::for_features(features);
    let (problem, classes) = build_problem(features, y, &encoding);
    if classes.len() < 2 {
        return Err(Error::Fit(format!(
            "logistic regression needs at least two classes, found {}",
            classes.len()
        )));
    }
    let p = encoding.width();
    if y.len() <= p {
        return Err(Error::Fit(format!(
            "{} rows is not enough for {p} encoded predictors",
            y.len()
        )));
    }
    let d = (classes.len() - 1) * p;
    let mut theta = vec![0.0; d];
    // start from the marginal log-odds
    let n = y.len() as f64;
    let mut counts = vec![0usize; classes.len()];
    for &c in &problem.y {
        counts[c] += 1;
    }
    for a in 1..classes.len() {
        theta[(a - 1) * p] = (counts[a] as f64 / n).ln() - (counts[0] as f64 / n).ln();
    }

    let mut ll = problem.log_likelihood(&theta);
    let mut converged = false;
    let mut separated = false;
    let mut ridge = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let (g, h) = problem.score_and_information(&theta);
        if g.amax() < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let Some((factor, ridged)) = factor_with_ridge(&h, 1e-12, 1e-8) else {
            break;
        };
        ridge |= ridged;
        let step = factor.solve(&g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut clamped = false;
            let cand: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(b, s)| {
                    let v = b + t * s;
                    if v.abs() > opts.coef_cap {
                        clamped = true;
                        v.signum() * opts.coef_cap
                    } else {
                        v
                    }
                })
                .collect();
            let cand_ll = problem.log_likelihood(&cand);
            if cand_ll >= ll - 1e-12 * (1.0 + ll.abs()) {
                accepted = Some((cand, cand_ll, clamped));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_ll, clamped)) = accepted else {
            break;
        };
        separated |= clamped;
        let stalled = (cand_ll - ll).abs() <= 1e-13 * (1.0 + ll.abs());
        theta = cand;
        ll = cand_ll;
        if stalled && separated {
            break;
        }
    }
    if !converged {
        let (g, _) = problem.score_and_information(&theta);
        converged = g.amax() < opts.tol;
    }

    let (_, h) = problem.score_and_information(&theta);
    let (factor, ridged) = factor_with_ridge(&h, 1e-12, 1e-8)
        .ok_or_else(|| Error::Fit("information matrix is singular".into()))?;
    ridge |= ridged;
    let cov = factor.inverse();
    let mut coefficients = vec![vec![0.0; p]];
    let mut standard_errors = Vec::with_capacity(classes.len() - 1);
    for a in 1..classes.len() {
        coefficients.push(theta[(a - 1) * p..a * p].to_vec());
        standard_errors.push(
            (0..p)
                .map(|j| {
                    let idx = (a - 1) * p + j;
                    cov[(idx, idx)].max(0.0).sqrt()
                })
                .collect(),
        );
    }
    Ok(LogisticModel {
        encoding,
        classes,
        coefficients,
        standard_errors,
        converged,
        iterations,
        separated,
        ridge,
        log_likelihood: ll,
    })
}

/// Draw a class code from the model's softmax at `x_row`.
pub fn draw_class<R: Rng + ?Sized>(model: &LogisticModel, x_row: &[Value], rng: &mut R) -> Result<u32> {
    let probs = model.probabilities(x_row)?;
    Ok(model.classes[sample_categorical(&probs, rng)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_class_is_an_error() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1u32; 4];
        assert!(fit_logistic(&[Feature::Numeric(&x)], &y, NewtonOptions::default()).is_err());
    }

    #[test]
    fn separable_data_is_capped_and_ordered() {
        let x: Vec<f64> = (0..40)
            .map(|i| if i < 20 { -0.05 - 0.05 * i as f64 } else { 0.05 * (i - 19) as f64 })
            .collect();
        let y: Vec<u32> = (0..40).map(|i| u32::from(i >= 20)).collect();
        let m = fit_logistic(&[Feature::Numeric(&x)], &y, NewtonOptions::default()).unwrap();
        assert!(m.separated);
        assert!(m.parameters().iter().all(|b| b.abs() <= 30.0));
        let lo = m.probabilities(&[Value::Num(-0.5)]).unwrap();
        let hi = m.probabilities(&[Value::Num(0.5)]).unwrap();
        assert!(lo[0] > lo[1]);
        assert!(hi[1] > hi[0]);
    }

    #[test]
    fn recovers_known_binary_model() {
        let mut r = rng::stream(3, &[]);
        let n = 20_000;
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let y: Vec<u32> = x
            .iter()
            .map(|v| {
                let p = 1.0 / (1.0 + (-(0.5 + 1.5 * v)).exp());
                u32::from(r.random::<f64>() < p)
            })
            .collect();
        let m = fit_logistic(&[Feature::Numeric(&x)], &y, NewtonOptions::default()).unwrap();
        assert!(m.converged);
        let b = &m.coefficients[1];
        assert!((b[0] - 0.5).abs() < 4.0 * m.standard_errors[0][0]);
        assert!((b[1] - 1.5).abs() < 4.0 * m.standard_errors[0][1]);
    }

    #[test]
    fn unobserved_classes_are_dropped() {
        let x: Vec<f64> = (0..30).map(f64::from).collect();
        let y: Vec<u32> = (0..30).map(|i| if i % 3 == 0 { 4 } else { 2 }).collect();
        let m = fit_logistic(&[Feature::Numeric(&x)], &y, NewtonOptions::default()).unwrap();
        assert_eq!(m.classes, vec![2, 4]);
        let mut r = rng::stream(0, &[]);
        for _ in 0..100 {
            let c = draw_class(&m, &[Value::Num(3.0)], &mut r).unwrap();
            assert!(c == 2 || c == 4);
        }
    }
}
