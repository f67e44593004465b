//! Small dense helpers shared by the solvers.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Solves `(a + ridge I) x = b` for symmetric positive definite `a`.
pub(crate) fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64, what: &str) -> Result<DMatrix<f64>> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += ridge;
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))?;
    let x = chol.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("solution of {what}")));
    }
    Ok(x)
}

/// Ratio of largest to smallest absolute eigenvalue of a symmetric matrix.
pub(crate) fn symmetric_condition(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigen();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for v in eig.eigenvalues.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
