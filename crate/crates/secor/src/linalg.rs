//! Small dense linear-algebra helpers shared across the crate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// Default cap on the estimated condition number before a solve is refused.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric: max |A - A'| = {max_asym:.3e} exceeds tolerance")]
    NotSymmetric { max_asym: f64 },
    #[error("matrix is not positive semi-definite: min eigenvalue {min_eig:.3e} < -1e-10 * {max_eig:.3e}")]
    NotPsd { min_eig: f64, max_eig: f64 },
    #[error("matrix is singular or ill-conditioned: estimated condition number {cond:.3e} exceeds cap {cap:.3e}")]
    IllConditioned { cond: f64, cap: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Largest absolute asymmetry `max_ij |A_ij - A_ji|`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Checks symmetry within `tol` relative to the largest entry.
pub fn check_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> Result<(), LinalgError> {
    let scale = m.iter().fold(0.0_f64, |a, &x| a.max(x.abs())).max(1e-300);
    let asym = max_asymmetry(m);
    if asym > rel_tol * scale {
        return Err(LinalgError::NotSymmetric { max_asym: asym });
    }
    Ok(())
}

/// Checks positive semi-definiteness: smallest eigenvalue >= -1e-10 * largest.
///
/// Tries a Cholesky factorization first (sufficient); falls back to a full
/// symmetric eigendecomposition only when that fails.
pub fn check_psd(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    if m.iter().all(|&x| x == 0.0) {
        return Ok(());
    }
    if Cholesky::new(m.clone()).is_some() {
        return Ok(());
    }
    let eigs = m.clone().symmetric_eigenvalues();
    let min_eig = eigs.min();
    let max_eig = eigs.max().max(0.0);
    if min_eig < -1e-10 * max_eig.max(1e-300) {
        return Err(LinalgError::NotPsd { min_eig, max_eig });
    }
    Ok(())
}

/// Cholesky factorization of a symmetric positive-definite matrix with a
/// power-iteration condition-number guard.
pub struct SpdSolver {
    chol: Cholesky<f64, Dyn>,
    cond: f64,
}

impl SpdSolver {
    /// Factors `m`, refusing matrices whose estimated condition number
    /// exceeds `cap`.
    pub fn new(m: &DMatrix<f64>, cap: f64) -> Result<Self, LinalgError> {
        let chol = Cholesky::new(m.clone()).ok_or_else(|| {
            // Not positive definite: report the condition as infinite.
            LinalgError::IllConditioned {
                cond: f64::INFINITY,
                cap,
            }
        })?;
        let lambda_max = power_iteration_extreme(m, None, 30);
        let lambda_min_inv = power_iteration_extreme(m, Some(&chol), 30);
        let cond = if lambda_min_inv > 0.0 {
            lambda_max * lambda_min_inv
        } else {
            f64::INFINITY
        };
        if cond > cap {
            return Err(LinalgError::IllConditioned { cond, cap });
        }
        Ok(Self { chol, cond })
    }

    pub fn with_default_cap(m: &DMatrix<f64>) -> Result<Self, LinalgError> {
        Self::new(m, DEFAULT_CONDITION_CAP)
    }

    /// Estimated condition number of the factored matrix.
    pub fn condition(&self) -> f64 {
        self.cond
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }
}

/// Estimates the extreme eigenvalue magnitude of a symmetric PD matrix by
/// power iteration: of `m` itself when `inv` is `None`, of `m^-1` (via the
/// Cholesky factor) otherwise. Deterministic start vector.
fn power_iteration_extreme(
    m: &DMatrix<f64>,
    inv: Option<&Cholesky<f64, Dyn>>,
    iters: usize,
) -> f64 {
    let n = m.nrows();
    // Fixed, slightly irregular start vector so the estimate is deterministic
    // and unlikely to be orthogonal to the extreme eigenvector.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.37 * ((i % 7) as f64) + 0.011 * (i as f64));
    let norm = v.norm();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = match inv {
            None => m * &v,
            Some(ch) => ch.solve(&v),
        };
        lambda = w.norm();
        if lambda == 0.0 || !lambda.is_finite() {
            return lambda;
        }
        v = w / lambda;
    }
    lambda
}

/// Rank of a matrix from its QR decomposition with a relative tolerance.
pub fn column_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let qr = m.clone().qr();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    let scale = (0..k).fold(0.0_f64, |a, i| a.max(r[(i, i)].abs()));
    if scale == 0.0 {
        return 0;
    }
    (0..k).filter(|&i| r[(i, i)].abs() > rel_tol * scale).count()
}

/// Quadratic form `x' M x`.
pub fn quadratic_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (m * x).dot(x)
}
