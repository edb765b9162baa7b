use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::linalg::factor_with_ridge;
use super::{check_equal_rows, DesignEncoding, Feature};
use crate::data::Value;
use crate::error::{Error, Result};

const RIDGE: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-10;

/// Ordinary least squares fit. Coefficients follow `encoding.terms()`
/// (intercept first).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub encoding: DesignEncoding,
    pub coefficients: Vec<f64>,
    pub residual_sd: f64,
    pub standard_errors: Vec<f64>,
    /// A 1e-8 ridge was added because the design was rank deficient.
    pub ridge: bool,
    pub n: usize,
}

impl LinearModel {
    pub fn predict(&self, x_row: &[Value]) -> Result<f64> {
        let x = self.encoding.encode_row(x_row)?;
        Ok(dot(&x, &self.coefficients))
    }

    /// Predictions for every row of `features` (layout assumed to match).
    pub fn predict_all(&self, features: &[Feature<'_>]) -> Vec<f64> {
        let x = self.encoding.matrix(features);
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta).iter().copied().collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fit_ols(features: &[Feature<'_>], y: &[f64]) -> Result<LinearModel> {
    check_equal_rows(features, y.len())?;
    let encoding = DesignEncoding::for_features(features);
    let n = y.len();
    let p = encoding.width();
    if n <= p {
        return Err(Error::Fit(format!(
            "{n} rows is not enough for {p} coefficients"
        )));
    }
    let x = encoding.matrix(features);
    let xtx = x.tr_mul(&x);
    let yv = DVector::from_column_slice(y);
    let xty = x.tr_mul(&yv);
    let (factor, ridge) = factor_with_ridge(&xtx, PIVOT_TOL, RIDGE)
        .ok_or_else(|| Error::Fit("design matrix is singular beyond the ridge fallback".into()))?;
    let beta = factor.solve(&xty);
    let resid = &yv - &x * &beta;
    let rss = resid.norm_squared();
    let sigma2 = rss / (n - p) as f64;
    let inv = factor.inverse();
    let standard_errors = (0..p).map(|j| (sigma2 * inv[(j, j)]).max(0.0).sqrt()).collect();
    Ok(LinearModel {
        encoding,
        coefficients: beta.iter().copied().collect(),
        residual_sd: sigma2.sqrt(),
        standard_errors,
        ridge,
        n,
    })
}

/// xᵀβ plus Normal(0, residual_sd²) noise.
pub fn draw_linear<R: Rng + ?Sized>(model: &LinearModel, x_row: &[Value], rng: &mut R) -> Result<f64> {
    let mean = model.predict(x_row)?;
    let z: f64 = StandardNormal.sample(rng);
    Ok(mean + model.residual_sd * z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn exact_fit() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let m = fit_ols(&[Feature::Numeric(&x)], &y).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 1e-9);
        assert!((m.coefficients[1] - 2.0).abs() < 1e-9);
        assert!(m.residual_sd < 1e-9);
        assert!(!m.ridge);
    }

    #[test]
    fn constant_target() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y = vec![4.5; 10];
        let m = fit_ols(&[Feature::Numeric(&x)], &y).unwrap();
        assert!((m.coefficients[0] - 4.5).abs() < 1e-12);
        assert!(m.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn noisy_slope_and_standard_error() {
        let mut r = rng::stream(2024, &[]);
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut r);
                2.0 * v + z
            })
            .collect::<Vec<f64>>();
        let m = fit_ols(&[Feature::Numeric(&x)], &y).unwrap();
        assert!((1.95..=2.05).contains(&m.coefficients[1]));
        // unit noise variance: SE(slope) ≈ 1 / sqrt(Σ(x - x̄)²)
        let mean = x.iter().sum::<f64>() / n as f64;
        let sxx: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let oracle = 1.0 / sxx.sqrt();
        assert!((m.standard_errors[1] / oracle - 1.0).abs() < 0.10);
    }

    #[test]
    fn too_few_rows() {
        let x = [1.0, 2.0];
        assert!(fit_ols(&[Feature::Numeric(&x)], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn empty_level_triggers_ridge() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let g = vec![0u32; 20];
        let y: Vec<f64> = x.iter().map(|v| 1.0 + v).collect();
        let m = fit_ols(
            &[
                Feature::Numeric(&x),
                Feature::Categorical {
                    codes: &g,
                    n_levels: 2,
                },
            ],
            &y,
        )
        .unwrap();
        assert!(m.ridge);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noiseless_draw_is_deterministic() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let mut m = fit_ols(&[Feature::Numeric(&x)], &y).unwrap();
        m.residual_sd = 0.0;
        let mut r = rng::stream(0, &[]);
        let v = draw_linear(&m, &[Value::Num(1.5)], &mut r).unwrap();
        assert!((v - 6.0).abs() < 1e-9);
        assert!(draw_linear(&m, &[Value::Cat(0)], &mut r).is_err());
    }

    #[test]
    fn normal_draw_moments() {
        let m = LinearModel {
            encoding: DesignEncoding::new(vec![None]),
            coefficients: vec![0.0, 1.0],
            residual_sd: 1.0,
            standard_errors: vec![0.0, 0.0],
            ridge: false,
            n: 0,
        };
        let mut r = rng::stream(11, &[]);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| draw_linear(&m, &[Value::Num(0.0)], &mut r).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>()
            / (draws.len() - 1) as f64)
            .sqrt();
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((sd - 1.0).abs() < 0.02, "sd {sd}");
    }
}
