//! Small dense helpers shared by the solver and the baselines.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Frobenius inner product `<A, B>`.
pub fn frob_inner(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + x * y)
}

pub fn frob_sq(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Squared Frobenius norm of `a − b`.
pub fn frob_dist_sq(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + (x - y) * (x - y))
}

/// `max(a − step·grad, 0)` elementwise.
pub fn projected_step(a: &Array2<f64>, grad: &Array2<f64>, step: f64) -> Array2<f64> {
    Zip::from(a)
        .and(grad)
        .map_collect(|x, g| (x - step * g).max(0.0))
}

pub(crate) fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Solves `X · S = B` for symmetric positive definite `S` (so `X = B S⁻¹`).
///
/// Fails when `S` is numerically singular, judged by its eigenvalue spread.
pub fn solve_spd_right(b: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<Array2<f64>> {
    let k = s.nrows();
    let sm = to_dmatrix(s);
    let eig = sm.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= max * f64::EPSILON * k as f64 {
        return Err(Error::solver(format!(
            "Gram system is numerically singular (eigenvalues in [{min:e}, {max:e}]); \
             increase the ridge"
        )));
    }
    let chol = sm.cholesky().ok_or_else(|| {
        Error::solver("Cholesky factorisation failed on the Gram system; increase the ridge")
    })?;
    // X S = B  <=>  S X^T = B^T
    let xt = chol.solve(&to_dmatrix(b.t()));
    Ok(from_dmatrix(&xt).reversed_axes())
}
