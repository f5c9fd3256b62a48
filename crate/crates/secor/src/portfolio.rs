//! Portfolio construction and exact risk arithmetic.
//!
//! Two closed forms are supported: the unconstrained Sharpe-optimal weights
//! `Ω̂⁻¹ α` and the equality-constrained minimum-variance portfolio. Controls
//! (random, factor-span) are built independently of any covariance estimate,
//! which is what exempts them from second-order corrections.

use crate::covariance::CovarianceEstimate;
use crate::linalg::{column_rank, quadratic_form, LinalgError, SpdSolver, DEFAULT_CONDITION_CAP};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("alpha must be finite and not identically zero")]
    InvalidAlpha,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("covariance matrix is singular or ill-conditioned (estimated condition {cond:.3e}, cap {cap:.3e})")]
    IllConditioned { cond: f64, cap: f64 },
    #[error("constraints are degenerate or infeasible: {0}")]
    DegenerateConstraints(String),
    #[error("constraint matrix must have at least one column and full column rank")]
    InvalidConstraints,
}

impl From<LinalgError> for PortfolioError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::IllConditioned { cond, cap } => PortfolioError::IllConditioned { cond, cap },
            LinalgError::DimensionMismatch { expected, actual } => {
                PortfolioError::DimensionMismatch { expected, actual }
            }
            other => PortfolioError::DegenerateConstraints(other.to_string()),
        }
    }
}

/// How a portfolio was constructed. Second-order corrections apply only to
/// covariance-optimized strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SharpeUnconstrained,
    MinVarianceConstrained,
    RandomControl,
    FactorSpanControl,
}

impl Strategy {
    /// Whether weights were chosen by optimizing against an estimated
    /// covariance; controls return `false`.
    pub fn is_optimized(self) -> bool {
        matches!(self, Strategy::SharpeUnconstrained | Strategy::MinVarianceConstrained)
    }
}

/// Expected excess returns, one per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector {
    values: DVector<f64>,
}

impl AlphaVector {
    pub fn new(values: DVector<f64>) -> Result<Self, PortfolioError> {
        if values.iter().any(|x| !x.is_finite()) || values.iter().all(|&x| x == 0.0) {
            return Err(PortfolioError::InvalidAlpha);
        }
        Ok(Self { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, PortfolioError> {
        Self::new(DVector::from_row_slice(values))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }
}

/// Equality constraints `A' w = b` (A is N x m with full column rank).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraints {
    matrix_a: DMatrix<f64>,
    vector_b: DVector<f64>,
}

impl LinearConstraints {
    pub fn new(matrix_a: DMatrix<f64>, vector_b: DVector<f64>) -> Result<Self, PortfolioError> {
        let m = matrix_a.ncols();
        if m == 0 || vector_b.len() != m {
            return Err(PortfolioError::InvalidConstraints);
        }
        if column_rank(&matrix_a, 1e-10) < m {
            return Err(PortfolioError::InvalidConstraints);
        }
        Ok(Self { matrix_a, vector_b })
    }

    /// Fully-invested constraint `1' w = 1`.
    pub fn fully_invested(n: usize) -> Self {
        Self {
            matrix_a: DMatrix::from_element(n, 1, 1.0),
            vector_b: DVector::from_element(1, 1.0),
        }
    }

    /// `{1'w = 1, alpha'w = target_return}`.
    pub fn fully_invested_with_return(
        alpha: &AlphaVector,
        target_return: f64,
    ) -> Result<Self, PortfolioError> {
        let n = alpha.len();
        let mut a = DMatrix::zeros(n, 2);
        for i in 0..n {
            a[(i, 0)] = 1.0;
            a[(i, 1)] = alpha.values()[i];
        }
        Self::new(a, DVector::from_row_slice(&[1.0, target_return]))
    }

    pub fn matrix_a(&self) -> &DMatrix<f64> {
        &self.matrix_a
    }

    pub fn vector_b(&self) -> &DVector<f64> {
        &self.vector_b
    }

    pub fn n_constraints(&self) -> usize {
        self.matrix_a.ncols()
    }

    /// Max constraint violation `max_j |A'w - b|_j`.
    pub fn violation(&self, weights: &DVector<f64>) -> f64 {
        (self.matrix_a.transpose() * weights - &self.vector_b)
            .iter()
            .fold(0.0_f64, |a, &x| a.max(x.abs()))
    }
}

/// A weight vector with the provenance needed to decide whether second-order
/// corrections apply.
#[derive(Debug, Clone)]
pub struct Portfolio {
    weights: DVector<f64>,
    strategy: Strategy,
    alpha_used: Option<AlphaVector>,
    constraints: Option<LinearConstraints>,
    warnings: Vec<String>,
}

impl Portfolio {
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn alpha_used(&self) -> Option<&AlphaVector> {
        self.alpha_used.as_ref()
    }

    pub fn constraints(&self) -> Option<&LinearConstraints> {
        self.constraints.as_ref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn n_assets(&self) -> usize {
        self.weights.len()
    }

    /// Same portfolio with weights multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Portfolio {
        Portfolio {
            weights: &self.weights * c,
            strategy: self.strategy,
            alpha_used: self.alpha_used.clone(),
            constraints: self.constraints.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// Builds a portfolio from externally computed weights. Intended for
    /// controls and tests; optimized strategies should come from the
    /// constructors in this module.
    pub fn from_weights(weights: DVector<f64>, strategy: Strategy) -> Portfolio {
        Portfolio {
            weights,
            strategy,
            alpha_used: None,
            constraints: None,
            warnings: Vec::new(),
        }
    }

    pub(crate) fn new_internal(
        weights: DVector<f64>,
        strategy: Strategy,
        alpha_used: Option<AlphaVector>,
        constraints: Option<LinearConstraints>,
        warnings: Vec<String>,
    ) -> Portfolio {
        Portfolio {
            weights,
            strategy,
            alpha_used,
            constraints,
            warnings,
        }
    }
}

/// Unconstrained Sharpe-optimal weights `w = Ω̂⁻¹ α`, returned unnormalized
/// (the optimum is defined only up to scale; callers rescale as needed).
///
/// Attaches a warning when `N > effective_t`: inverse-Wishart moments of the
/// estimate diverge there and no finite-variance correction exists.
pub fn sharpe_optimal_portfolio(
    cov: &CovarianceEstimate,
    alpha: &AlphaVector,
) -> Result<Portfolio, PortfolioError> {
    sharpe_optimal_portfolio_with_cap(cov, alpha, DEFAULT_CONDITION_CAP)
}

/// [`sharpe_optimal_portfolio`] with an explicit condition-number cap.
pub fn sharpe_optimal_portfolio_with_cap(
    cov: &CovarianceEstimate,
    alpha: &AlphaVector,
    condition_cap: f64,
) -> Result<Portfolio, PortfolioError> {
    let n = cov.n_assets();
    if alpha.len() != n {
        return Err(PortfolioError::DimensionMismatch {
            expected: n,
            actual: alpha.len(),
        });
    }
    let solver = SpdSolver::new(cov.matrix(), condition_cap)?;
    let weights = solver.solve(alpha.values());
    let mut warnings = Vec::new();
    if n as f64 > cov.effective_t() {
        warnings.push(format!(
            "asset count {} exceeds effective observations {:.1}: inverse-Wishart moments diverge and second-order corrections are undefined",
            n,
            cov.effective_t()
        ));
    }
    Ok(Portfolio {
        weights,
        strategy: Strategy::SharpeUnconstrained,
        alpha_used: Some(alpha.clone()),
        constraints: None,
        warnings,
    })
}

/// Minimum-variance portfolio under equality constraints:
/// `w = Ω̂⁻¹ A (A' Ω̂⁻¹ A)⁻¹ b`, the unique minimizer of `w'Ω̂w` s.t. `A'w = b`.
pub fn min_variance_portfolio(
    cov: &CovarianceEstimate,
    constraints: &LinearConstraints,
) -> Result<Portfolio, PortfolioError> {
    min_variance_portfolio_with_cap(cov, constraints, DEFAULT_CONDITION_CAP)
}

pub fn min_variance_portfolio_with_cap(
    cov: &CovarianceEstimate,
    constraints: &LinearConstraints,
    condition_cap: f64,
) -> Result<Portfolio, PortfolioError> {
    let n = cov.n_assets();
    if constraints.matrix_a().nrows() != n {
        return Err(PortfolioError::DimensionMismatch {
            expected: n,
            actual: constraints.matrix_a().nrows(),
        });
    }
    let solver = SpdSolver::new(cov.matrix(), condition_cap)?;
    let s = solver.solve_matrix(constraints.matrix_a()); // Ω̂⁻¹ A
    let gram = constraints.matrix_a().transpose() * &s; // A' Ω̂⁻¹ A (m x m, SPD)
    let gram_solver = SpdSolver::new(&gram, condition_cap).map_err(|_| {
        PortfolioError::DegenerateConstraints(
            "A' Ω̂⁻¹ A is rank deficient; constraints are collinear under this covariance".into(),
        )
    })?;
    let y = gram_solver.solve(constraints.vector_b());
    let weights = s * y;
    debug_assert!(constraints.violation(&weights) < 1e-8);
    Ok(Portfolio {
        weights,
        strategy: Strategy::MinVarianceConstrained,
        alpha_used: None,
        constraints: Some(constraints.clone()),
        warnings: Vec::new(),
    })
}

/// `w' Ω w` against any covariance matrix (estimate or truth).
///
/// When `cov` is the same estimate the portfolio was optimized on, this is
/// the naive risk forecast.
pub fn portfolio_variance(
    portfolio: &Portfolio,
    cov: &DMatrix<f64>,
) -> Result<f64, PortfolioError> {
    if cov.nrows() != portfolio.n_assets() || cov.ncols() != portfolio.n_assets() {
        return Err(PortfolioError::DimensionMismatch {
            expected: portfolio.n_assets(),
            actual: cov.nrows(),
        });
    }
    Ok(quadratic_form(cov, portfolio.weights()))
}

/// Risk of an estimated portfolio decomposed about the true optimum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RiskDecomposition {
    /// `w*' Ω w*`: risk attainable with perfect knowledge of Ω.
    pub optimal_variance: f64,
    /// `Δw' Ω Δw >= 0`: the cost of estimation error.
    pub estimation_penalty: f64,
    /// `2 w*' Ω Δw`, reported for verification; vanishes for any feasible
    /// `ŵ` when `w*` is the exact constrained optimum.
    pub cross_term: f64,
}

/// Decomposes `ŵ' Ω ŵ` as optimal variance + estimation penalty (+ cross
/// term). `w_star` must be the exact minimum-variance portfolio for
/// `true_cov` under the same constraints as `w_hat`.
pub fn decompose_risk(
    true_cov: &DMatrix<f64>,
    w_star: &Portfolio,
    w_hat: &Portfolio,
) -> Result<RiskDecomposition, PortfolioError> {
    let n = true_cov.nrows();
    if w_star.n_assets() != n || w_hat.n_assets() != n || true_cov.ncols() != n {
        return Err(PortfolioError::DimensionMismatch {
            expected: n,
            actual: w_star.n_assets().max(w_hat.n_assets()),
        });
    }
    let delta = w_hat.weights() - w_star.weights();
    let omega_star = true_cov * w_star.weights();
    Ok(RiskDecomposition {
        optimal_variance: omega_star.dot(w_star.weights()),
        estimation_penalty: quadratic_form(true_cov, &delta),
        cross_term: 2.0 * omega_star.dot(&delta),
    })
}

/// Random control portfolio: i.i.d. standard-normal weights normalized to
/// unit gross exposure (`Σ|w| = 1`). Independent of any covariance estimate.
pub fn random_control_portfolio<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Portfolio {
    assert!(n >= 1, "need at least one asset");
    let mut weights = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let gross: f64 = weights.iter().map(|x| x.abs()).sum();
    if gross > 0.0 {
        weights /= gross;
    } else {
        weights = DVector::from_element(n, 1.0 / n as f64);
    }
    Portfolio {
        weights,
        strategy: Strategy::RandomControl,
        alpha_used: None,
        constraints: None,
        warnings: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::EstimatorKind;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cov_from(matrix: DMatrix<f64>, t: f64) -> CovarianceEstimate {
        CovarianceEstimate::new(matrix, t, EstimatorKind::Sample, false).unwrap()
    }

    #[test]
    fn identity_covariance_returns_alpha() {
        let cov = cov_from(DMatrix::identity(3, 3), 100.0);
        let alpha = AlphaVector::from_slice(&[0.5, -1.0, 2.0]).unwrap();
        let p = sharpe_optimal_portfolio(&cov, &alpha).unwrap();
        for i in 0..3 {
            assert_relative_eq!(p.weights()[i], alpha.values()[i], epsilon = 1e-12);
        }
        assert_eq!(p.strategy(), Strategy::SharpeUnconstrained);
    }

    #[test]
    fn diagonal_covariance_scales_alpha() {
        let cov = cov_from(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]), 10.0);
        let alpha = AlphaVector::from_slice(&[1.0, 1.0]).unwrap();
        let p = sharpe_optimal_portfolio(&cov, &alpha).unwrap();
        assert_relative_eq!(p.weights()[0], 0.25, epsilon = 1e-12);
        assert_relative_eq!(p.weights()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hand_inverted_two_by_two() {
        let cov = cov_from(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]), 10.0);
        let alpha = AlphaVector::from_slice(&[1.0, 0.0]).unwrap();
        let p = sharpe_optimal_portfolio(&cov, &alpha).unwrap();
        assert_relative_eq!(p.weights()[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(p.weights()[1], -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn small_sample_warning_attached() {
        let cov = cov_from(DMatrix::identity(4, 4), 3.0);
        let alpha = AlphaVector::from_slice(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        let p = sharpe_optimal_portfolio(&cov, &alpha).unwrap();
        assert_eq!(p.warnings().len(), 1);
        assert!(p.warnings()[0].contains("diverge"));
    }

    #[test]
    fn singular_covariance_is_conditioning_error() {
        let cov = cov_from(DMatrix::zeros(2, 2), 10.0);
        let alpha = AlphaVector::from_slice(&[1.0, 0.0]).unwrap();
        match sharpe_optimal_portfolio(&cov, &alpha) {
            Err(PortfolioError::IllConditioned { cond, .. }) => assert!(cond.is_infinite()),
            other => panic!("expected conditioning error, got {other:?}"),
        }
    }

    #[test]
    fn min_variance_symmetric_case() {
        let cov = cov_from(DMatrix::identity(4, 4), 10.0);
        let p = min_variance_portfolio(&cov, &LinearConstraints::fully_invested(4)).unwrap();
        for i in 0..4 {
            assert_relative_eq!(p.weights()[i], 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn min_variance_inverse_variance_weighting() {
        let cov = cov_from(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]), 10.0);
        let p = min_variance_portfolio(&cov, &LinearConstraints::fully_invested(2)).unwrap();
        assert_relative_eq!(p.weights()[0], 0.8, epsilon = 1e-12);
        assert_relative_eq!(p.weights()[1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn min_variance_hits_return_target() {
        let cov = cov_from(
            DMatrix::from_row_slice(3, 3, &[0.04, 0.01, 0.0, 0.01, 0.09, -0.02, 0.0, -0.02, 0.25]),
            10.0,
        );
        let alpha = AlphaVector::from_slice(&[0.02, 0.05, 0.11]).unwrap();
        let r = 0.07;
        let cons = LinearConstraints::fully_invested_with_return(&alpha, r).unwrap();
        let p = min_variance_portfolio(&cov, &cons).unwrap();
        assert!(cons.violation(p.weights()) < 1e-10);
        assert_relative_eq!(p.weights().dot(alpha.values()), r, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_constraints_rejected() {
        // duplicated constraint column -> invalid at construction
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(LinearConstraints::new(a, DVector::from_row_slice(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn variance_examples() {
        let w = Portfolio::from_weights(
            DVector::from_row_slice(&[1.0, 0.0]),
            Strategy::RandomControl,
        );
        let omega = DMatrix::from_row_slice(2, 2, &[0.01, 0.0, 0.0, 0.04]);
        assert_relative_eq!(portfolio_variance(&w, &omega).unwrap(), 0.01, epsilon = 1e-15);

        let hedged = Portfolio::from_weights(
            DVector::from_row_slice(&[1.0, 1.0]),
            Strategy::RandomControl,
        );
        let anti = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_relative_eq!(portfolio_variance(&hedged, &anti).unwrap(), 0.0, epsilon = 1e-12);

        let half = Portfolio::from_weights(
            DVector::from_row_slice(&[0.5, 0.5]),
            Strategy::RandomControl,
        );
        let c = DMatrix::from_row_slice(2, 2, &[0.04, 0.02, 0.02, 0.04]);
        assert_relative_eq!(portfolio_variance(&half, &c).unwrap(), 0.03, epsilon = 1e-15);
    }

    #[test]
    fn variance_dimension_mismatch() {
        let w = Portfolio::from_weights(DVector::from_row_slice(&[1.0]), Strategy::RandomControl);
        let omega = DMatrix::identity(2, 2);
        assert!(portfolio_variance(&w, &omega).is_err());
    }

    #[test]
    fn risk_decomposition_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let omega = crate::sim::random_spd(4, 0.5, 2.0, &mut rng);
        let cov = cov_from(omega.clone(), 10.0);
        let cons = LinearConstraints::fully_invested(4);
        let w_star = min_variance_portfolio(&cov, &cons).unwrap();

        // zero perturbation
        let d0 = decompose_risk(&omega, &w_star, &w_star).unwrap();
        assert!(d0.estimation_penalty.abs() < 1e-14);
        assert!(d0.cross_term.abs() < 1e-12);

        // any feasible perturbation: cross term vanishes, identity holds
        for k in 0..20 {
            let mut z = DVector::from_fn(4, |i, _| ((i + k) as f64 * 0.713).sin());
            let shift = z.sum() / 4.0;
            z.add_scalar_mut(-shift); // 1'z = 0 keeps feasibility
            let w_hat = Portfolio::from_weights(w_star.weights() + z, Strategy::MinVarianceConstrained);
            let d = decompose_risk(&omega, &w_star, &w_hat).unwrap();
            assert!(d.cross_term.abs() < 1e-10, "cross term {}", d.cross_term);
            let total = portfolio_variance(&w_hat, &omega).unwrap();
            assert_relative_eq!(
                d.optimal_variance + d.estimation_penalty,
                total,
                max_relative = 1e-12
            );
            assert!(d.estimation_penalty >= 0.0);
        }
    }

    #[test]
    fn min_variance_beats_random_feasible_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let omega = crate::sim::random_spd(6, 0.3, 1.5, &mut rng);
        let cov = cov_from(omega.clone(), 50.0);
        let cons = LinearConstraints::fully_invested(6);
        let w_star = min_variance_portfolio(&cov, &cons).unwrap();
        let base = portfolio_variance(&w_star, &omega).unwrap();
        for _ in 0..100 {
            let mut z = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let shift = z.sum() / 6.0;
            z.add_scalar_mut(-shift);
            let w = Portfolio::from_weights(w_star.weights() + z * 0.1, Strategy::RandomControl);
            assert!(portfolio_variance(&w, &omega).unwrap() >= base - 1e-12);
        }
    }

    #[test]
    fn random_control_is_deterministic_and_normalized() {
        let mut r1 = ChaCha8Rng::seed_from_u64(123);
        let mut r2 = ChaCha8Rng::seed_from_u64(123);
        let a = random_control_portfolio(5, &mut r1);
        let b = random_control_portfolio(5, &mut r2);
        assert_eq!(a.weights(), b.weights());
        let gross: f64 = a.weights().iter().map(|x| x.abs()).sum();
        assert_relative_eq!(gross, 1.0, epsilon = 1e-12);
        assert_eq!(a.strategy(), Strategy::RandomControl);

        let single = random_control_portfolio(1, &mut r1);
        assert_relative_eq!(single.weights()[0].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn random_control_mean_is_centered() {
        let trials = 10_000;
        let n = 4;
        let mut sums = vec![0.0; n];
        let mut sumsq = vec![0.0; n];
        for s in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(2024);
            rng.set_stream(s);
            let p = random_control_portfolio(n, &mut rng);
            for i in 0..n {
                sums[i] += p.weights()[i];
                sumsq[i] += p.weights()[i] * p.weights()[i];
            }
        }
        for i in 0..n {
            let mean = sums[i] / trials as f64;
            let var = sumsq[i] / trials as f64 - mean * mean;
            let se = (var / trials as f64).sqrt();
            assert!(mean.abs() <= 3.0 * se, "asset {i}: mean {mean} se {se}");
        }
    }

    #[test]
    fn covariance_scaling_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let omega = crate::sim::random_spd(5, 0.2, 1.0, &mut rng);
        let c = 3.7;
        let cov1 = cov_from(omega.clone(), 10.0);
        let cov2 = cov_from(&omega * c, 10.0);
        let alpha = AlphaVector::from_slice(&[0.1, -0.2, 0.3, 0.05, -0.15]).unwrap();
        let p1 = sharpe_optimal_portfolio(&cov1, &alpha).unwrap();
        let p2 = sharpe_optimal_portfolio(&cov2, &alpha).unwrap();
        for i in 0..5 {
            assert_relative_eq!(p2.weights()[i], p1.weights()[i] / c, max_relative = 1e-10);
        }
        let cons = LinearConstraints::fully_invested(5);
        let m1 = min_variance_portfolio(&cov1, &cons).unwrap();
        let m2 = min_variance_portfolio(&cov2, &cons).unwrap();
        for i in 0..5 {
            assert_relative_eq!(m2.weights()[i], m1.weights()[i], max_relative = 1e-10);
        }
    }
}
