//! Second-order risk corrections.
//!
//! An optimized portfolio aligns itself with the estimation error of the
//! covariance model it was optimized on, so its naive forecast `w'Ω̂w` is
//! biased low. For `w = Ω̂⁻¹α` with a Gaussian sample estimator the bias is a
//! pure function of dimension and window: correcting the forecast variance by
//! `(1 - N/T_eff)⁻²` (assets) or `(1 - K/T_eff)⁻²` (factors) restores
//! unbiasedness. Control portfolios built independently of `Ω̂` need no
//! correction; [`corrected_asset_forecast`] enforces that via
//! [`Strategy::is_optimized`](crate::portfolio::Strategy::is_optimized).

use crate::covariance::CovarianceEstimate;
use crate::factor::FactorModel;
use crate::portfolio::{portfolio_variance, Portfolio};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("correction diverges: {m} {what} with effective window {t_eff} (number of assets approaches the number of observations)")]
    Divergence { m: usize, what: &'static str, t_eff: f64 },
    #[error("exact coefficient requires t_eff > {required} (got {t_eff})")]
    ExactCoefficientUndefined { required: f64, t_eff: f64 },
    #[error("second-order corrections apply only to covariance-optimized portfolios; strategy {strategy:?} is a control")]
    ControlPortfolio { strategy: crate::portfolio::Strategy },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("coherent correction undefined: alpha has no component in the exposure span (a = 0)")]
    UndefinedCoherentCorrection,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Portfolio(#[from] crate::portfolio::PortfolioError),
}

/// Multiplicative corrections to a naive forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrectionFactors {
    /// Applied to variances: `(1 - m/T_eff)⁻²`.
    pub variance_factor: f64,
    /// Applied to standard deviations: `(1 - m/T_eff)⁻¹`.
    pub stdev_factor: f64,
}

fn simplified_correction(m: usize, t_eff: f64, what: &'static str) -> Result<CorrectionFactors, ForecastError> {
    if !(t_eff > 0.0) {
        return Err(ForecastError::InvalidParameter(format!(
            "effective window must be positive, got {t_eff}"
        )));
    }
    if m as f64 >= t_eff {
        return Err(ForecastError::Divergence { m, what, t_eff });
    }
    let stdev_factor = 1.0 / (1.0 - m as f64 / t_eff);
    Ok(CorrectionFactors {
        variance_factor: stdev_factor * stdev_factor,
        stdev_factor,
    })
}

/// Asset-level correction for `n` assets estimated over `t_eff` observations.
pub fn asset_correction_factor(n: usize, t_eff: f64) -> Result<CorrectionFactors, ForecastError> {
    simplified_correction(n, t_eff, "assets")
}

/// Factor-level correction for `k` factors estimated over `t_eff`
/// observations. `k = 0` yields the identity correction.
pub fn factor_correction_factor(k: usize, t_eff: f64) -> Result<CorrectionFactors, ForecastError> {
    simplified_correction(k, t_eff, "factors")
}

/// Exact mean coefficient of the inverse sample covariance:
/// `E[Ω̂⁻¹] = c · Ω⁻¹` with `c = t / (t - n - 1)`, for `t > n + 1`.
pub fn inverse_wishart_mean_coefficient(n: usize, t_eff: f64) -> Result<f64, ForecastError> {
    let required = n as f64 + 1.0;
    if t_eff <= required {
        return Err(ForecastError::ExactCoefficientUndefined { required, t_eff });
    }
    Ok(t_eff / (t_eff - n as f64 - 1.0))
}

/// Exact second-moment coefficient:
/// `E[Ω̂⁻¹ Ω Ω̂⁻¹] = c · Ω⁻¹` with
/// `c = t²(t-1) / ((t-n)(t-n-1)(t-n-3))`, for `t > n + 3`.
pub fn inverse_wishart_quadratic_coefficient(n: usize, t_eff: f64) -> Result<f64, ForecastError> {
    let required = n as f64 + 3.0;
    if t_eff <= required {
        return Err(ForecastError::ExactCoefficientUndefined { required, t_eff });
    }
    let nf = n as f64;
    Ok(t_eff * t_eff * (t_eff - 1.0)
        / ((t_eff - nf) * (t_eff - nf - 1.0) * (t_eff - nf - 3.0)))
}

/// Exact (finite-sample) unbiased variance multiplier for the ensemble-mean
/// forecast of `w = Ω̂⁻¹α`: the ratio of the two inverse-Wishart
/// coefficients, `t(t-1) / ((t-n)(t-n-3))`. The simplified
/// [`asset_correction_factor`] is its large-N/T limit and is the factor used
/// in forecasts; this one backs the Wishart oracle tests.
pub fn exact_asset_correction(n: usize, t_eff: f64) -> Result<CorrectionFactors, ForecastError> {
    let c1 = inverse_wishart_mean_coefficient(n, t_eff)?;
    let c2 = inverse_wishart_quadratic_coefficient(n, t_eff)?;
    let variance_factor = c2 / c1;
    Ok(CorrectionFactors {
        variance_factor,
        stdev_factor: variance_factor.sqrt(),
    })
}

/// Forecast level: corrections keyed by assets or by factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastLevel {
    Asset,
    Factor,
}

/// A naive and second-order-corrected variance forecast.
#[derive(Debug, Clone, Serialize)]
pub struct RiskForecast {
    pub naive_variance: f64,
    pub corrected_variance: f64,
    /// Effective ratio corrected/naive. Equals `(1 - m/T_eff)⁻²` exactly at
    /// asset level; at factor level the uncorrected specific term dilutes it.
    pub correction_factor_variance: f64,
    pub level: ForecastLevel,
    /// N (asset level) or K (factor level).
    pub n_or_k: usize,
    pub effective_t: f64,
    /// Factor-term split of the naive variance (factor level only).
    pub factor_variance: Option<f64>,
    /// Specific-term split of the naive variance (factor level only).
    pub specific_variance: Option<f64>,
}

impl RiskForecast {
    pub fn naive_stdev(&self) -> f64 {
        self.naive_variance.sqrt()
    }

    pub fn corrected_stdev(&self) -> f64 {
        self.corrected_variance.sqrt()
    }
}

/// Corrected forecast for a portfolio optimized on `cov` over `n` assets:
/// `corrected = w'Ω̂w · (1 - n/T_eff)⁻²`.
///
/// Refuses control portfolios: a portfolio built independently of `Ω̂` has an
/// unbiased naive forecast and must not be inflated.
pub fn corrected_asset_forecast(
    portfolio: &Portfolio,
    cov: &CovarianceEstimate,
    n: usize,
) -> Result<RiskForecast, ForecastError> {
    if !portfolio.strategy().is_optimized() {
        return Err(ForecastError::ControlPortfolio {
            strategy: portfolio.strategy(),
        });
    }
    let naive_variance = portfolio_variance(portfolio, cov.matrix())?;
    let t_eff = cov.effective_t();
    let factors = asset_correction_factor(n, t_eff)?;
    Ok(RiskForecast {
        naive_variance,
        corrected_variance: naive_variance * factors.variance_factor,
        correction_factor_variance: factors.variance_factor,
        level: ForecastLevel::Asset,
        n_or_k: n,
        effective_t: t_eff,
        factor_variance: None,
        specific_variance: None,
    })
}

/// Corrected forecast for a portfolio optimized within a factor model:
/// the `(1 - K/T_eff)⁻²` factor applies to the factor term `w'X̂F̂X̂'w` only,
/// leaving the (diagonal, diversifiable) specific variance uncorrected.
///
/// Refuses control portfolios, like the asset-level forecast: their naive
/// factor risk is already unbiased.
pub fn corrected_factor_forecast(
    portfolio: &Portfolio,
    model: &FactorModel,
    t_eff: f64,
) -> Result<RiskForecast, ForecastError> {
    if !portfolio.strategy().is_optimized() {
        return Err(ForecastError::ControlPortfolio {
            strategy: portfolio.strategy(),
        });
    }
    if portfolio.n_assets() != model.n_assets() {
        return Err(ForecastError::DimensionMismatch {
            expected: model.n_assets(),
            actual: portfolio.n_assets(),
        });
    }
    let k = model.k();
    let factors = factor_correction_factor(k, t_eff)?;
    let factor_variance = model.factor_variance_of(portfolio.weights());
    let specific_variance = model.specific_variance_of(portfolio.weights());
    let naive_variance = factor_variance + specific_variance;
    let corrected_variance = factor_variance * factors.variance_factor + specific_variance;
    let effective = if naive_variance > 0.0 {
        corrected_variance / naive_variance
    } else {
        1.0
    };
    Ok(RiskForecast {
        naive_variance,
        corrected_variance,
        correction_factor_variance: effective,
        level: ForecastLevel::Factor,
        n_or_k: k,
        effective_t: t_eff,
        factor_variance: Some(factor_variance),
        specific_variance: Some(specific_variance),
    })
}

/// Inputs to [`coherent_exposure_correction`], all observable to the
/// forecaster once alpha has been decomposed against the model exposures.
#[derive(Debug, Clone)]
pub struct CoherentErrorInputs {
    /// `alpha_perp' alpha_perp`.
    pub alpha_perp_sq: f64,
    /// `a = X̂'α / N` in the normalized basis.
    pub a_vec: DVector<f64>,
    /// Estimated factor covariance (stands in for the true one at large T).
    pub f_hat: DMatrix<f64>,
    /// Uniform specific variance σ².
    pub sigma_sq: f64,
    /// The arbitrary overall weight scale of the optimized portfolio.
    pub w_scale: f64,
}

/// Additive variance term for the hidden factor risk a portfolio picks up by
/// tilting out of the model exposure plane:
/// `w² (α⊥⁴ (a'F̂a)/(a'a)² + 2 α⊥² σ²)`, to be added to the model factor
/// risk. Zero when alpha lies fully in the exposure span.
pub fn coherent_exposure_correction(inputs: &CoherentErrorInputs) -> Result<f64, ForecastError> {
    if inputs.alpha_perp_sq < 0.0 || inputs.sigma_sq < 0.0 {
        return Err(ForecastError::InvalidParameter(
            "alpha_perp_sq and sigma_sq must be non-negative".into(),
        ));
    }
    let a_sq = inputs.a_vec.dot(&inputs.a_vec);
    if inputs.alpha_perp_sq == 0.0 {
        return Ok(0.0);
    }
    if a_sq <= 0.0 {
        return Err(ForecastError::UndefinedCoherentCorrection);
    }
    if inputs.f_hat.nrows() != inputs.a_vec.len() || inputs.f_hat.ncols() != inputs.a_vec.len() {
        return Err(ForecastError::DimensionMismatch {
            expected: inputs.a_vec.len(),
            actual: inputs.f_hat.nrows(),
        });
    }
    let afa = (&inputs.f_hat * &inputs.a_vec).dot(&inputs.a_vec);
    let w_sq = inputs.w_scale * inputs.w_scale;
    Ok(w_sq
        * (inputs.alpha_perp_sq * inputs.alpha_perp_sq * afa / (a_sq * a_sq)
            + 2.0 * inputs.alpha_perp_sq * inputs.sigma_sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::EstimatorKind;
    use crate::portfolio::{random_control_portfolio, sharpe_optimal_portfolio, AlphaVector};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_ratio_doubles_stdev() {
        let f = asset_correction_factor(500, 1000.0).unwrap();
        assert_relative_eq!(f.stdev_factor, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.variance_factor, 4.0, epsilon = 1e-12);
        let g = asset_correction_factor(50, 100.0).unwrap();
        assert_relative_eq!(g.variance_factor, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn no_noise_limit_is_identity() {
        let f = asset_correction_factor(1, 1e9).unwrap();
        assert_relative_eq!(f.stdev_factor, 1.0, epsilon = 1e-8);
        assert_relative_eq!(f.variance_factor, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn factor_level_examples() {
        let f = factor_correction_factor(50, 200.0).unwrap();
        assert_relative_eq!(f.stdev_factor, 4.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(factor_correction_factor(0, 52.0).unwrap().variance_factor, 1.0);
        let g = factor_correction_factor(10, 40.0).unwrap();
        assert_relative_eq!(g.variance_factor, 0.75_f64.powi(-2), epsilon = 1e-12);
    }

    #[test]
    fn divergence_errors() {
        assert!(matches!(
            asset_correction_factor(100, 100.0),
            Err(ForecastError::Divergence { .. })
        ));
        assert!(matches!(
            factor_correction_factor(60, 52.0),
            Err(ForecastError::Divergence { .. })
        ));
    }

    #[test]
    fn correction_factors_increase_and_diverge() {
        let t = 100.0;
        let mut prev = 0.0;
        for n in 1..100 {
            let f = asset_correction_factor(n, t).unwrap().variance_factor;
            assert!(f > prev, "not strictly increasing at n={n}");
            prev = f;
        }
        assert!(prev > 1e3, "factor should blow up as n/t -> 1, got {prev}");
    }

    #[test]
    fn exact_coefficients_match_closed_forms() {
        // N=2, T=10: E[inv] coefficient 10/7, quadratic 900/280
        assert_relative_eq!(
            inverse_wishart_mean_coefficient(2, 10.0).unwrap(),
            10.0 / 7.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            inverse_wishart_quadratic_coefficient(2, 10.0).unwrap(),
            900.0 / 280.0,
            epsilon = 1e-12
        );
        // N=1 scalar specialization: inverse-chi-square moments T/(T-2),
        // T²/((T-2)(T-4))
        let t = 10.0;
        assert_relative_eq!(
            inverse_wishart_mean_coefficient(1, t).unwrap(),
            t / (t - 2.0),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            inverse_wishart_quadratic_coefficient(1, t).unwrap(),
            t * t / ((t - 2.0) * (t - 4.0)),
            epsilon = 1e-12
        );
        // exact unbiased multiplier at N=20, T=60: T(T-1)/((T-N)(T-N-3))
        assert_relative_eq!(
            exact_asset_correction(20, 60.0).unwrap().variance_factor,
            60.0 * 59.0 / (40.0 * 37.0),
            epsilon = 1e-12
        );
        assert!(matches!(
            inverse_wishart_quadratic_coefficient(7, 10.0),
            Err(ForecastError::ExactCoefficientUndefined { .. })
        ));
    }

    #[test]
    fn corrected_asset_forecast_applies_factor() {
        let cov = CovarianceEstimate::new(
            DMatrix::identity(4, 4),
            8.0,
            EstimatorKind::Sample,
            false,
        )
        .unwrap();
        let alpha = AlphaVector::from_slice(&[1.0, -1.0, 0.5, 0.25]).unwrap();
        let p = sharpe_optimal_portfolio(&cov, &alpha).unwrap();
        let f = corrected_asset_forecast(&p, &cov, 4).unwrap();
        assert_relative_eq!(
            f.corrected_variance,
            f.naive_variance * f.correction_factor_variance,
            max_relative = 1e-12
        );
        assert_relative_eq!(f.correction_factor_variance, 4.0, epsilon = 1e-12);
        assert_eq!(f.level, ForecastLevel::Asset);

        // near-zero n/T limit: corrected == naive
        let cov_big = CovarianceEstimate::new(
            DMatrix::identity(4, 4),
            1e9,
            EstimatorKind::Sample,
            false,
        )
        .unwrap();
        let p2 = sharpe_optimal_portfolio(&cov_big, &alpha).unwrap();
        let f2 = corrected_asset_forecast(&p2, &cov_big, 4).unwrap();
        assert_relative_eq!(f2.corrected_variance, f2.naive_variance, max_relative = 1e-7);
    }

    #[test]
    fn control_portfolio_is_refused() {
        let cov = CovarianceEstimate::new(
            DMatrix::identity(3, 3),
            10.0,
            EstimatorKind::Sample,
            false,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let control = random_control_portfolio(3, &mut rng);
        assert!(matches!(
            corrected_asset_forecast(&control, &cov, 3),
            Err(ForecastError::ControlPortfolio { .. })
        ));

        // same contract at factor level for a span control
        let world = crate::factor::SyntheticFactorWorld::generate(
            20,
            2,
            DMatrix::identity(2, 2) * 1e-4,
            0.01,
            0.0,
            &mut rng,
        )
        .unwrap();
        let model = world.model_with_true_factor_cov().unwrap();
        let span = crate::factor::span_control_portfolio(&model, &mut rng);
        assert!(matches!(
            corrected_factor_forecast(&span, &model, 50.0),
            Err(ForecastError::ControlPortfolio { .. })
        ));
    }

    #[test]
    fn factor_forecast_corrects_factor_term_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let world = crate::factor::SyntheticFactorWorld::generate(
            50,
            5,
            DMatrix::identity(5, 5) * 1e-4,
            0.01,
            0.0,
            &mut rng,
        )
        .unwrap();
        let model = world.model_with_true_factor_cov().unwrap();
        let alpha = AlphaVector::new(crate::sim::gaussian_vector(50, &mut rng)).unwrap();
        let p = crate::factor::factor_optimal_portfolio(&model, &alpha).unwrap();
        let t_eff = 20.0;
        let f = corrected_factor_forecast(&p, &model, t_eff).unwrap();
        let cf = factor_correction_factor(5, t_eff).unwrap().variance_factor;
        assert_relative_eq!(
            f.corrected_variance,
            f.factor_variance.unwrap() * cf + f.specific_variance.unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            f.naive_variance,
            f.factor_variance.unwrap() + f.specific_variance.unwrap(),
            max_relative = 1e-12
        );
        // effective ratio is diluted below the pure-factor multiplier
        assert!(f.correction_factor_variance < cf);
        assert!(f.correction_factor_variance > 1.0);

        // zero factor exposure: nothing to correct. Build a weight vector
        // orthogonal to every exposure column.
        let mut w = crate::sim::gaussian_vector(50, &mut rng);
        let proj = model.exposures().transpose() * &w / 50.0;
        w -= model.exposures() * proj;
        let p0 = crate::portfolio::Portfolio::from_weights(
            w,
            crate::portfolio::Strategy::SharpeUnconstrained,
        );
        let f0 = corrected_factor_forecast(&p0, &model, t_eff).unwrap();
        assert!(f0.factor_variance.unwrap() < 1e-18 * f0.naive_variance.max(1e-30));
        assert_relative_eq!(f0.corrected_variance, f0.naive_variance, max_relative = 1e-9);
    }

    #[test]
    fn pure_factor_portfolio_gets_thirty_percent_boost() {
        // K=50, T_eff=200 on a portfolio with negligible specific risk:
        // corrected stdev = naive * 4/3.
        let k = 50;
        let n = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let world = crate::factor::SyntheticFactorWorld::generate(
            n,
            k,
            DMatrix::identity(k, k) * 1e-4,
            1e-6, // tiny specific risk
            0.0,
            &mut rng,
        )
        .unwrap();
        let model = world.model_with_true_factor_cov().unwrap();
        let p = crate::factor::span_control_portfolio(&model, &mut rng);
        // treat as optimized for the purpose of the forecast arithmetic
        let p = crate::portfolio::Portfolio::from_weights(
            p.weights().clone(),
            crate::portfolio::Strategy::SharpeUnconstrained,
        );
        let f = corrected_factor_forecast(&p, &model, 200.0).unwrap();
        assert_relative_eq!(
            f.corrected_stdev() / f.naive_stdev(),
            4.0 / 3.0,
            max_relative = 1e-4
        );
    }

    #[test]
    fn coherent_correction_cases() {
        // alpha fully in span -> 0
        let zero = CoherentErrorInputs {
            alpha_perp_sq: 0.0,
            a_vec: DVector::from_row_slice(&[1.0, 0.0]),
            f_hat: DMatrix::identity(2, 2),
            sigma_sq: 0.5,
            w_scale: 2.0,
        };
        assert_eq!(coherent_exposure_correction(&zero).unwrap(), 0.0);

        // sigma=0, F=I, a'a=1, alpha_perp_sq=0.1, w=1 -> 0.01
        let ex = CoherentErrorInputs {
            alpha_perp_sq: 0.1,
            a_vec: DVector::from_row_slice(&[1.0, 0.0]),
            f_hat: DMatrix::identity(2, 2),
            sigma_sq: 0.0,
            w_scale: 1.0,
        };
        assert_relative_eq!(coherent_exposure_correction(&ex).unwrap(), 0.01, epsilon = 1e-15);

        // zero a with nonzero alpha_perp: undefined
        let bad = CoherentErrorInputs {
            alpha_perp_sq: 0.1,
            a_vec: DVector::from_row_slice(&[0.0, 0.0]),
            f_hat: DMatrix::identity(2, 2),
            sigma_sq: 0.0,
            w_scale: 1.0,
        };
        assert!(matches!(
            coherent_exposure_correction(&bad),
            Err(ForecastError::UndefinedCoherentCorrection)
        ));
    }

    #[test]
    fn coherent_correction_nonnegative_for_psd_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let k = 3;
            let inputs = CoherentErrorInputs {
                alpha_perp_sq: rng.gen::<f64>(),
                a_vec: crate::sim::gaussian_vector(k, &mut rng),
                f_hat: crate::sim::random_spd(k, 0.1, 2.0, &mut rng),
                sigma_sq: rng.gen::<f64>(),
                w_scale: rng.gen::<f64>() * 2.0 - 1.0,
            };
            assert!(coherent_exposure_correction(&inputs).unwrap() >= 0.0);
        }
    }
}
