use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Cholesky factor of a symmetric positive definite matrix after Jacobi
/// equilibration (unit diagonal), so pivot checks are scale free.
pub(crate) struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    scale: DVector<f64>,
}

impl SpdFactor {
    /// `None` when the matrix is not numerically positive definite: a
    /// non-positive diagonal entry, a failed factorisation, or a squared
    /// pivot below `rel_pivot_tol` (1 - R² of a column on the ones before it).
    pub(crate) fn new(a: &DMatrix<f64>, rel_pivot_tol: f64) -> Option<Self> {
        let n = a.nrows();
        let mut scale = DVector::zeros(n);
        for i in 0..n {
            let d = a[(i, i)];
            if !(d > 0.0 && d.is_finite()) {
                return None;
            }
            scale[i] = d.sqrt().recip();
        }
        let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * scale[i] * scale[j]);
        let chol = Cholesky::new(scaled)?;
        let l = chol.l_dirty();
        if (0..n).any(|i| l[(i, i)] * l[(i, i)] < rel_pivot_tol) {
            return None;
        }
        Some(SpdFactor { chol, scale })
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let scaled_b = b.component_mul(&self.scale);
        self.chol.solve(&scaled_b).component_mul(&self.scale)
    }

    pub(crate) fn inverse(&self) -> DMatrix<f64> {
        let inv = self.chol.inverse();
        let s = &self.scale;
        DMatrix::from_fn(inv.nrows(), inv.ncols(), |i, j| inv[(i, j)] * s[i] * s[j])
    }
}

/// Factor `a`, falling back to `a + ridge·I` (and then larger ridges) when
/// it is singular. Returns the factor and whether a ridge was added.
pub(crate) fn factor_with_ridge(
    a: &DMatrix<f64>,
    rel_pivot_tol: f64,
    ridge: f64,
) -> Option<(SpdFactor, bool)> {
    if let Some(f) = SpdFactor::new(a, rel_pivot_tol) {
        return Some((f, false));
    }
    let mut lambda = ridge;
    for _ in 0..12 {
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += lambda;
        }
        if let Some(f) = SpdFactor::new(&b, 0.0) {
            return Some((f, true));
        }
        lambda *= 10.0;
    }
    None
}
