//! Linear factor risk models.
//!
//! Covariance structure `Ω = X F X' + Δ` with `K` systematic factors and
//! diagonal specific risk. The working basis rescales assets to uniform
//! specific variance and rotates factors so `X'X = N·I_K`; cross-sectional
//! OLS in that basis is the usual specific-risk-weighted regression in the
//! original one.

use crate::linalg::{check_psd, check_symmetric, LinalgError, SpdSolver, DEFAULT_CONDITION_CAP};
use crate::panel::ReturnsPanel;
use crate::portfolio::{AlphaVector, Portfolio, Strategy};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("specific variances must all be positive")]
    NonPositiveSpecificVar,
    #[error("factor covariance must be symmetric positive semi-definite: {0}")]
    BadFactorCov(String),
    #[error("exposure matrix has rank {rank}, expected {k}")]
    RankDeficient { rank: usize, k: usize },
    #[error("operation requires a normalized model basis (X'X = N·I, uniform specific variance)")]
    NotNormalized,
    #[error("factor covariance is singular or ill-conditioned")]
    SingularFactorCov,
    #[error("alpha has no component orthogonal to the exposure span; nothing to add")]
    NothingToAdd,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Factor risk model: exposures `X` (N x K), factor covariance `F` (K x K),
/// diagonal specific variance.
#[derive(Debug, Clone)]
pub struct FactorModel {
    exposures: DMatrix<f64>,
    factor_cov: DMatrix<f64>,
    specific_var: DVector<f64>,
    k: usize,
}

impl FactorModel {
    pub fn new(
        exposures: DMatrix<f64>,
        factor_cov: DMatrix<f64>,
        specific_var: DVector<f64>,
    ) -> Result<Self, FactorError> {
        let (n, k) = exposures.shape();
        if factor_cov.nrows() != k || factor_cov.ncols() != k {
            return Err(FactorError::DimensionMismatch {
                expected: k,
                actual: factor_cov.nrows(),
            });
        }
        if specific_var.len() != n {
            return Err(FactorError::DimensionMismatch {
                expected: n,
                actual: specific_var.len(),
            });
        }
        if specific_var.iter().any(|&v| !(v > 0.0)) {
            return Err(FactorError::NonPositiveSpecificVar);
        }
        check_symmetric(&factor_cov, 1e-10).map_err(|e| FactorError::BadFactorCov(e.to_string()))?;
        check_psd(&factor_cov).map_err(|e| FactorError::BadFactorCov(e.to_string()))?;
        let rank = crate::linalg::column_rank(&exposures, 1e-10);
        if rank < k {
            return Err(FactorError::RankDeficient { rank, k });
        }
        Ok(Self {
            exposures,
            factor_cov,
            specific_var,
            k,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.exposures.nrows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn exposures(&self) -> &DMatrix<f64> {
        &self.exposures
    }

    pub fn factor_cov(&self) -> &DMatrix<f64> {
        &self.factor_cov
    }

    pub fn specific_var(&self) -> &DVector<f64> {
        &self.specific_var
    }

    /// Full model covariance `X F X' + Δ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut m = &self.exposures * &self.factor_cov * self.exposures.transpose();
        for i in 0..self.n_assets() {
            m[(i, i)] += self.specific_var[i];
        }
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Whether the basis is normalized: `X'X = N·I_K` and uniform specific
    /// variance.
    pub fn is_normalized(&self) -> bool {
        let n = self.n_assets() as f64;
        let gram = self.exposures.transpose() * &self.exposures;
        for i in 0..self.k {
            for j in 0..self.k {
                let expect = if i == j { n } else { 0.0 };
                if (gram[(i, j)] - expect).abs() > NORMALIZATION_TOL * n {
                    return false;
                }
            }
        }
        let s0 = self.specific_var[0];
        self.specific_var
            .iter()
            .all(|&s| (s - s0).abs() <= NORMALIZATION_TOL * s0)
    }

    /// Uniform specific variance of a normalized model.
    pub fn uniform_specific_var(&self) -> Result<f64, FactorError> {
        if !self.is_normalized() {
            return Err(FactorError::NotNormalized);
        }
        Ok(self.specific_var[0])
    }

    /// Factor contribution `w' X F X' w` of a weight vector.
    pub fn factor_variance_of(&self, weights: &DVector<f64>) -> f64 {
        let expo = self.exposures.transpose() * weights;
        (&self.factor_cov * &expo).dot(&expo)
    }

    /// Specific contribution `w' Δ w`.
    pub fn specific_variance_of(&self, weights: &DVector<f64>) -> f64 {
        weights
            .iter()
            .zip(self.specific_var.iter())
            .map(|(&w, &s)| w * w * s)
            .sum()
    }
}

/// Invertible record of the basis change performed by
/// [`normalize_model_basis`]; suffices to map weights in either direction.
#[derive(Debug, Clone)]
pub struct ScaleMap {
    /// Per-asset return scaling `s_i = sigma / sigma_i`.
    asset_scales: DVector<f64>,
    /// The uniform specific volatility `sigma` of the normalized basis.
    sigma: f64,
    /// Factor basis change `M` (K x K_eff): `X_norm = diag(s) X M`.
    factor_transform: DMatrix<f64>,
    /// Exposure columns dropped by rank projection (0 for full rank).
    dropped: usize,
}

impl ScaleMap {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn asset_scales(&self) -> &DVector<f64> {
        &self.asset_scales
    }

    pub fn factor_transform(&self) -> &DMatrix<f64> {
        &self.factor_transform
    }

    pub fn dropped_factors(&self) -> usize {
        self.dropped
    }

    /// Maps normalized-basis weights to original-basis weights
    /// (`w_i = w_norm_i * s_i` keeps the portfolio return invariant).
    pub fn weights_to_original(&self, w_norm: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(w_norm.len(), |i, _| w_norm[i] * self.asset_scales[i])
    }

    /// Inverse of [`ScaleMap::weights_to_original`].
    pub fn weights_from_original(&self, w_orig: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(w_orig.len(), |i, _| w_orig[i] / self.asset_scales[i])
    }
}

/// A model and alpha re-expressed in the normalized basis.
#[derive(Debug, Clone)]
pub struct NormalizedModel {
    pub model: FactorModel,
    pub alpha: AlphaVector,
    pub scale_map: ScaleMap,
}

/// Rescales assets to uniform specific variance and rotates factors so
/// `X'X = N·I_K`. A rank-deficient exposure matrix is projected onto its
/// column space (the dropped directions carry no covariance) and the
/// projection is recorded in the scale map.
pub fn normalize_model_basis(
    model: &FactorModel,
    alpha: &AlphaVector,
) -> Result<NormalizedModel, FactorError> {
    let n = model.n_assets();
    if alpha.len() != n {
        return Err(FactorError::DimensionMismatch {
            expected: n,
            actual: alpha.len(),
        });
    }
    // sigma: geometric mean of specific vols keeps the rescaled returns in
    // comparable units.
    let log_mean = model
        .specific_var
        .iter()
        .map(|&v| 0.5 * v.ln())
        .sum::<f64>()
        / n as f64;
    let sigma = log_mean.exp();
    let scales = DVector::from_fn(n, |i, _| sigma / model.specific_var[i].sqrt());

    let x_scaled = DMatrix::from_fn(n, model.k, |i, j| model.exposures[(i, j)] * scales[i]);
    let gram = x_scaled.transpose() * &x_scaled;
    let eig = gram.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x));
    if max_eig <= 0.0 {
        return Err(FactorError::RankDeficient {
            rank: 0,
            k: model.k,
        });
    }
    let keep: Vec<usize> = (0..model.k)
        .filter(|&j| eig.eigenvalues[j] > 1e-12 * max_eig)
        .collect();
    let rank = keep.len();
    // M = V_r diag(lambda^-1/2) sqrt(N): (X_s M)'(X_s M) = N·I_r.
    let mut m_map = DMatrix::zeros(model.k, rank);
    // P = diag(lambda^1/2) V_r' / sqrt(N): factor returns map f_norm = P f.
    let mut p_map = DMatrix::zeros(rank, model.k);
    let sqrt_n = (n as f64).sqrt();
    for (col, &j) in keep.iter().enumerate() {
        let lam = eig.eigenvalues[j];
        for row in 0..model.k {
            m_map[(row, col)] = eig.eigenvectors[(row, j)] / lam.sqrt() * sqrt_n;
            p_map[(col, row)] = eig.eigenvectors[(row, j)] * lam.sqrt() / sqrt_n;
        }
    }
    let x_norm = &x_scaled * &m_map;
    let f_norm = &p_map * &model.factor_cov * p_map.transpose();
    let alpha_norm = DVector::from_fn(n, |i, _| alpha.values()[i] * scales[i]);

    let model_norm = FactorModel::new(x_norm, f_norm, DVector::from_element(n, sigma * sigma))?;
    let alpha_norm = AlphaVector::new(alpha_norm).map_err(|_| {
        FactorError::InvalidParameter("alpha vanished under rescaling".into())
    })?;
    Ok(NormalizedModel {
        model: model_norm,
        alpha: alpha_norm,
        scale_map: ScaleMap {
            asset_scales: scales,
            sigma,
            factor_transform: m_map,
            dropped: model.k - rank,
        },
    })
}

/// Cross-sectional OLS factor returns, one regression per period:
/// `f_t = (X'X)^-1 X' r_t`. Residuals are exposure-orthogonal by
/// construction.
pub fn estimate_factor_returns(
    exposures: &DMatrix<f64>,
    panel: &ReturnsPanel,
) -> Result<DMatrix<f64>, FactorError> {
    if exposures.nrows() != panel.n_assets() {
        return Err(FactorError::DimensionMismatch {
            expected: exposures.nrows(),
            actual: panel.n_assets(),
        });
    }
    let gram = exposures.transpose() * exposures;
    let solver = SpdSolver::new(&gram, DEFAULT_CONDITION_CAP)
        .map_err(|_| FactorError::RankDeficient {
            rank: crate::linalg::column_rank(exposures, 1e-10),
            k: exposures.ncols(),
        })?;
    let xt_r = exposures.transpose() * panel.values();
    Ok(solver.solve_matrix(&xt_r))
}

/// Alpha split against the exposure span: `alpha = X a + alpha_perp` with
/// `X' alpha_perp = 0` and `a = X' alpha / N` in the normalized basis.
#[derive(Debug, Clone)]
pub struct AlphaDecomposition {
    pub a_vec: DVector<f64>,
    pub alpha_perp: DVector<f64>,
    pub alpha_perp_sq: f64,
}

/// Decomposes alpha in a normalized model basis.
pub fn decompose_alpha(
    model: &FactorModel,
    alpha: &AlphaVector,
) -> Result<AlphaDecomposition, FactorError> {
    if !model.is_normalized() {
        return Err(FactorError::NotNormalized);
    }
    let n = model.n_assets();
    if alpha.len() != n {
        return Err(FactorError::DimensionMismatch {
            expected: n,
            actual: alpha.len(),
        });
    }
    let a_vec = model.exposures.transpose() * alpha.values() / n as f64;
    let alpha_perp = alpha.values() - &model.exposures * &a_vec;
    let alpha_perp_sq = alpha_perp.dot(&alpha_perp);
    Ok(AlphaDecomposition {
        a_vec,
        alpha_perp,
        alpha_perp_sq,
    })
}

/// Factor-model-optimal portfolio `w ∝ alpha_perp + sigma² N⁻¹ X F⁻¹ a`
/// (the dropped terms are O((sigma² F⁻¹/N)²)), scaled so the naive model
/// volatility is exactly 1. The unit-volatility scale is a convention; the
/// optimum itself is defined only up to a constant.
pub fn factor_optimal_portfolio(
    model: &FactorModel,
    alpha: &AlphaVector,
) -> Result<Portfolio, FactorError> {
    let sigma_sq = model.uniform_specific_var()?;
    let dec = decompose_alpha(model, alpha)?;
    let n = model.n_assets() as f64;
    let f_solver = SpdSolver::new(&model.factor_cov, DEFAULT_CONDITION_CAP)
        .map_err(|_| FactorError::SingularFactorCov)?;
    let y = f_solver.solve(&dec.a_vec);
    let raw = &dec.alpha_perp + &model.exposures * &y * (sigma_sq / n);
    let naive = model.factor_variance_of(&raw) + model.specific_variance_of(&raw);
    if !(naive > 0.0) {
        return Err(FactorError::InvalidParameter(
            "optimal weights have zero model variance".into(),
        ));
    }
    let weights = raw / naive.sqrt();
    Ok(Portfolio::new_internal(
        weights,
        Strategy::SharpeUnconstrained,
        Some(alpha.clone()),
        None,
        Vec::new(),
    ))
}

/// Control portfolio inside the factor span, `w = X b` with random `b`,
/// normalized to unit gross exposure. Exposed to factor risk but free of the
/// optimization-induced second-order bias.
pub fn span_control_portfolio<R: Rng + ?Sized>(model: &FactorModel, rng: &mut R) -> Portfolio {
    let b = crate::sim::gaussian_vector(model.k, rng);
    let mut weights = &model.exposures * b;
    let gross: f64 = weights.iter().map(|x| x.abs()).sum();
    if gross > 0.0 {
        weights /= gross;
    }
    Portfolio::from_weights(weights, Strategy::FactorSpanControl)
}

/// Appends the orthogonal alpha component as an extra factor.
///
/// The appended exposure column is `alpha_perp` rescaled to norm `sqrt(N)`
/// so the augmented model stays normalized; its factor-return series is the
/// matching rescale of `f^(alpha_perp) = alpha_perp' r / alpha_perp²` (the
/// exposure-times-return product is unchanged). The augmented factor
/// covariance is re-estimated from the joint K+1 series with divisor T;
/// specific variances are kept.
pub fn augment_with_alpha_factor(
    model: &FactorModel,
    alpha: &AlphaVector,
    panel: &ReturnsPanel,
) -> Result<FactorModel, FactorError> {
    if panel.n_assets() != model.n_assets() {
        return Err(FactorError::DimensionMismatch {
            expected: model.n_assets(),
            actual: panel.n_assets(),
        });
    }
    let dec = decompose_alpha(model, alpha)?;
    let alpha_sq = alpha.values().dot(alpha.values());
    if dec.alpha_perp_sq <= 1e-20 * alpha_sq {
        return Err(FactorError::NothingToAdd);
    }
    let n = model.n_assets();
    let t = panel.n_periods();
    let scale = (n as f64).sqrt() / dec.alpha_perp_sq.sqrt();
    let new_col = &dec.alpha_perp * scale;

    let mut exposures = DMatrix::zeros(n, model.k + 1);
    exposures.view_mut((0, 0), (n, model.k)).copy_from(&model.exposures);
    exposures.column_mut(model.k).copy_from(&new_col);

    // Joint OLS factor returns: the Gram matrix is N·I_{K+1} because the new
    // column is orthogonal to the old ones and has squared norm N.
    let f_hat = exposures.transpose() * panel.values() / n as f64;
    let mut factor_cov = &f_hat * f_hat.transpose() / t as f64;
    for i in 0..factor_cov.nrows() {
        for j in (i + 1)..factor_cov.ncols() {
            let v = 0.5 * (factor_cov[(i, j)] + factor_cov[(j, i)]);
            factor_cov[(i, j)] = v;
            factor_cov[(j, i)] = v;
        }
    }
    FactorModel::new(exposures, factor_cov, model.specific_var.clone())
}

/// A generated world with true exposures `X = X̂ + ε`, `X̂'ε = 0`, used as the
/// simulation-side ground truth for factor experiments.
#[derive(Debug, Clone)]
pub struct SyntheticFactorWorld {
    model_exposures: DMatrix<f64>,
    true_exposures: DMatrix<f64>,
    exposure_noise: DMatrix<f64>,
    true_factor_cov: DMatrix<f64>,
    noise_scale: f64,
    specific_var: DVector<f64>,
}

/// One sampled history from a synthetic world: returns plus the latent
/// factor and specific series that generated them.
#[derive(Debug, Clone)]
pub struct WorldDraw {
    pub panel: ReturnsPanel,
    pub factor_returns: DMatrix<f64>,
    pub specific_returns: DMatrix<f64>,
}

impl SyntheticFactorWorld {
    /// Generates model exposures with `X̂'X̂ = N·I_K` exactly, plus white
    /// exposure noise projected orthogonal to the model span and rescaled so
    /// `E[ε'ε] = N ρ² I_K`.
    pub fn generate<R: Rng + ?Sized>(
        n: usize,
        k: usize,
        true_factor_cov: DMatrix<f64>,
        specific_sigma: f64,
        rho: f64,
        rng: &mut R,
    ) -> Result<Self, FactorError> {
        if k == 0 || n <= k {
            return Err(FactorError::InvalidParameter(format!(
                "need n > k >= 1, got n={n}, k={k}"
            )));
        }
        if !(specific_sigma > 0.0) || rho < 0.0 {
            return Err(FactorError::InvalidParameter(
                "specific_sigma must be positive and rho non-negative".into(),
            ));
        }
        check_symmetric(&true_factor_cov, 1e-10)
            .map_err(|e| FactorError::BadFactorCov(e.to_string()))?;
        check_psd(&true_factor_cov).map_err(|e| FactorError::BadFactorCov(e.to_string()))?;

        let raw = crate::sim::gaussian_matrix(n, k, rng);
        let gram = raw.transpose() * &raw;
        let chol = Cholesky::new(gram).ok_or(FactorError::RankDeficient { rank: 0, k })?;
        // X̂ = raw L^-T sqrt(N): X̂'X̂ = N I exactly.
        let l_inv_t = chol
            .l()
            .transpose()
            .try_inverse()
            .ok_or(FactorError::RankDeficient { rank: 0, k })?;
        let model_exposures = raw * l_inv_t * (n as f64).sqrt();

        let exposure_noise = if rho > 0.0 {
            let mut eps = crate::sim::gaussian_matrix(n, k, rng) * rho;
            let proj = model_exposures.transpose() * &eps / n as f64;
            eps -= &model_exposures * proj;
            eps * (n as f64 / (n - k) as f64).sqrt()
        } else {
            DMatrix::zeros(n, k)
        };
        let true_exposures = &model_exposures + &exposure_noise;
        Ok(Self {
            model_exposures,
            true_exposures,
            exposure_noise,
            true_factor_cov,
            noise_scale: rho,
            specific_var: DVector::from_element(n, specific_sigma * specific_sigma),
        })
    }

    pub fn n_assets(&self) -> usize {
        self.model_exposures.nrows()
    }

    pub fn k(&self) -> usize {
        self.model_exposures.ncols()
    }

    pub fn model_exposures(&self) -> &DMatrix<f64> {
        &self.model_exposures
    }

    pub fn true_exposures(&self) -> &DMatrix<f64> {
        &self.true_exposures
    }

    pub fn exposure_noise(&self) -> &DMatrix<f64> {
        &self.exposure_noise
    }

    pub fn true_factor_cov(&self) -> &DMatrix<f64> {
        &self.true_factor_cov
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn specific_var(&self) -> &DVector<f64> {
        &self.specific_var
    }

    /// The forecaster's model under the large-T assumption `F̂ = F` (true
    /// factor covariance, model exposures, true specific risk).
    pub fn model_with_true_factor_cov(&self) -> Result<FactorModel, FactorError> {
        FactorModel::new(
            self.model_exposures.clone(),
            self.true_factor_cov.clone(),
            self.specific_var.clone(),
        )
    }

    /// Samples `r = X f + e` over `t` periods from the true process.
    pub fn sample_draw<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> WorldDraw {
        let chol = Cholesky::new(self.true_factor_cov.clone())
            .unwrap_or_else(|| {
                // PSD but semidefinite: jitter the diagonal minimally.
                let k = self.k();
                let mut m = self.true_factor_cov.clone();
                let scale = m.diagonal().max() * 1e-12 + 1e-300;
                for i in 0..k {
                    m[(i, i)] += scale;
                }
                Cholesky::new(m).expect("jittered factor covariance must factor")
            });
        let factor_returns = chol.l() * crate::sim::gaussian_matrix(self.k(), t, rng);
        let mut specific_returns = crate::sim::gaussian_matrix(self.n_assets(), t, rng);
        for i in 0..self.n_assets() {
            let s = self.specific_var[i].sqrt();
            for c in 0..t {
                specific_returns[(i, c)] *= s;
            }
        }
        let values = &self.true_exposures * &factor_returns + &specific_returns;
        WorldDraw {
            panel: ReturnsPanel::from_values(values).expect("generated panel is valid"),
            factor_returns,
            specific_returns,
        }
    }
}

/// Simulation-side oracle `w' X F X' w`: the true factor risk, not available
/// to the forecaster.
pub fn true_factor_risk(
    world: &SyntheticFactorWorld,
    portfolio: &Portfolio,
) -> Result<f64, FactorError> {
    if portfolio.n_assets() != world.n_assets() {
        return Err(FactorError::DimensionMismatch {
            expected: world.n_assets(),
            actual: portfolio.n_assets(),
        });
    }
    let expo = world.true_exposures.transpose() * portfolio.weights();
    Ok((&world.true_factor_cov * &expo).dot(&expo))
}
