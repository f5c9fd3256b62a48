//! Rolling out-of-sample forecast evaluation and bias statistics.
//!
//! The forecast made at period `t` (from the window `[t-T, t)`) is always
//! paired with the realized return at `t` — never same-period — so the
//! estimation window can never see the return it is being scored against.

use crate::covariance::CovarianceEstimate;
use crate::linalg::SpdSolver;
use crate::panel::ReturnsPanel;
use crate::portfolio::AlphaVector;
use crate::second_order::asset_correction_factor;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("trim rule invalid: lower {lower} must be below upper {upper}")]
    InvalidTrimRule { lower: f64, upper: f64 },
    #[error("window of {window} periods plus one evaluation step exceeds panel length {len}")]
    WindowExceedsHistory { window: usize, len: usize },
    #[error("need at least {required} valid observations in the bias window, got {actual}")]
    InsufficientObservations { required: usize, actual: usize },
    #[error("forecast standard deviations must be positive (found {value} at index {index})")]
    NonPositiveForecast { value: f64, index: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Covariance(#[from] crate::covariance::CovarianceError),
    #[error(transparent)]
    Portfolio(#[from] crate::portfolio::PortfolioError),
    #[error(transparent)]
    Forecast(#[from] crate::second_order::ForecastError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// How extreme returns are handled before estimation and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrimMode {
    /// Replace out-of-range values with the nearer bound.
    Clamp,
    /// Mark out-of-range observations invalid for the affected asset.
    Drop,
}

/// Range rule plus optional cross-sectional cap, applied per period after
/// the range rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrimRule {
    pub mode: TrimMode,
    pub lower: f64,
    pub upper: f64,
    /// Drop/clamp values further than this many cross-sectional standard
    /// deviations from the period's cross-sectional mean.
    pub cross_sectional_sigma_cap: Option<f64>,
}

impl TrimRule {
    pub fn validate(&self) -> Result<(), BacktestError> {
        if !(self.lower < self.upper) {
            return Err(BacktestError::InvalidTrimRule {
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(())
    }

    /// Clamp rule with the equity-study bounds (-50%, +80%).
    pub fn clamp_default() -> Self {
        TrimRule {
            mode: TrimMode::Clamp,
            lower: -0.5,
            upper: 0.8,
            cross_sectional_sigma_cap: None,
        }
    }
}

/// Result of applying a trim rule: the (possibly modified) panel, a validity
/// mask (all-true in clamp mode), and counts of affected entries.
#[derive(Debug, Clone)]
pub struct TrimOutcome {
    pub panel: ReturnsPanel,
    /// `valid[(i, t)]` is false when asset `i`'s observation at period `t`
    /// was dropped.
    pub valid: DMatrix<bool>,
    pub n_clamped: usize,
    pub n_dropped: usize,
}

/// Applies a trim rule to a panel. Clamp mode replaces out-of-range values
/// with the bound; drop mode marks them invalid (excluded from estimation and
/// from realized-return evaluation). The cross-sectional cap is applied after
/// the range rule, per period.
pub fn apply_trim(panel: &ReturnsPanel, rule: &TrimRule) -> Result<TrimOutcome, BacktestError> {
    rule.validate()?;
    let n = panel.n_assets();
    let t = panel.n_periods();
    let mut values = panel.values().clone();
    let mut valid = DMatrix::from_element(n, t, true);
    let mut n_clamped = 0;
    let mut n_dropped = 0;

    let mut handle = |v: &mut f64, ok: &mut bool, bound: f64, clamp: bool| {
        if clamp {
            *v = bound;
            n_clamped += 1;
        } else {
            *ok = false;
            n_dropped += 1;
        }
    };

    for s in 0..t {
        for i in 0..n {
            let v = values[(i, s)];
            if v < rule.lower {
                handle(&mut values[(i, s)], &mut valid[(i, s)], rule.lower, rule.mode == TrimMode::Clamp);
            } else if v > rule.upper {
                handle(&mut values[(i, s)], &mut valid[(i, s)], rule.upper, rule.mode == TrimMode::Clamp);
            }
        }
        if let Some(cap) = rule.cross_sectional_sigma_cap {
            // cross-sectional stats over entries still valid this period
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut count = 0usize;
            for i in 0..n {
                if valid[(i, s)] {
                    sum += values[(i, s)];
                    sumsq += values[(i, s)] * values[(i, s)];
                    count += 1;
                }
            }
            if count >= 2 {
                let mean = sum / count as f64;
                let var = (sumsq / count as f64 - mean * mean).max(0.0);
                let sd = var.sqrt();
                if sd > 0.0 {
                    for i in 0..n {
                        if !valid[(i, s)] {
                            continue;
                        }
                        let dev = values[(i, s)] - mean;
                        if dev.abs() > cap * sd {
                            let bound = mean + cap * sd * dev.signum();
                            handle(&mut values[(i, s)], &mut valid[(i, s)], bound, rule.mode == TrimMode::Clamp);
                        }
                    }
                }
            }
        }
    }
    let panel = ReturnsPanel::new(panel.assets().to_vec(), panel.dates().to_vec(), values)
        .expect("trim preserves panel validity");
    Ok(TrimOutcome {
        panel,
        valid,
        n_clamped,
        n_dropped,
    })
}

/// Portfolio policy evaluated by the rolling backtest.
#[derive(Debug, Clone)]
pub enum StrategySpec {
    /// Re-optimize `w = Ω̂⁻¹ α` every period on the rolling estimate, with a
    /// fixed alpha (one draw per trial).
    Optimized { alpha: AlphaVector },
    /// Hold fixed weights; the forecast still comes from the rolling
    /// estimate. Not subject to second-order bias.
    FixedControl { weights: DVector<f64> },
}

/// Forecast variants recorded per period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecasterKind {
    /// `sqrt(w' Ω̂ w)`.
    Naive,
    /// Naive times the asset-level stdev correction `(1 - N/T_eff)⁻¹`.
    CorrectedAsset,
    /// Naive times the exact finite-sample multiplier (Wishart-oracle
    /// variant of the correction).
    CorrectedAssetExact,
}

/// Time series of forecasts and next-period realized returns for one
/// strategy/forecaster pair.
#[derive(Debug, Clone, Serialize)]
pub struct BiasStatSeries {
    pub forecaster: ForecasterKind,
    /// Label of the period whose realized return is paired with each
    /// forecast (the forecast itself uses data strictly before it).
    pub timestamps: Vec<String>,
    pub forecast_stdevs: Vec<f64>,
    pub realized_next_returns: Vec<f64>,
    /// True where both the forecast and the realized return are valid
    /// (drop-mode trims can invalidate evaluation periods).
    pub usable: Vec<bool>,
}

impl BiasStatSeries {
    pub fn len(&self) -> usize {
        self.forecast_stdevs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forecast_stdevs.is_empty()
    }

    /// Forecast/realization ratios over usable periods.
    fn usable_ratios(&self) -> Result<Vec<f64>, BacktestError> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            if !self.usable[i] {
                continue;
            }
            let f = self.forecast_stdevs[i];
            if !(f > 0.0) {
                return Err(BacktestError::NonPositiveForecast { value: f, index: i });
            }
            out.push(self.realized_next_returns[i] / f);
        }
        Ok(out)
    }
}

/// Sample standard deviation (mean subtracted, divisor `count - 1`).
fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}

/// Full-sample bias statistic `B = std(R_{t+1} / Σ̂_t)`.
///
/// `B > 1` flags underforecast risk, `B < 1` overforecast. The standard
/// deviation subtracts the sample mean and divides by `count - 1`.
pub fn bias_statistic(series: &BiasStatSeries) -> Result<f64, BacktestError> {
    let ratios = series.usable_ratios()?;
    if ratios.len() < 2 {
        return Err(BacktestError::InsufficientObservations {
            required: 2,
            actual: ratios.len(),
        });
    }
    Ok(sample_std(&ratios))
}

/// Trailing bias statistics over a fixed window of usable observations
/// (e.g. 52 weeks). Returns one value per period at which the trailing
/// window is full, paired with the period's index into the series.
pub fn trailing_bias_statistic(
    series: &BiasStatSeries,
    window: usize,
) -> Result<Vec<(usize, f64)>, BacktestError> {
    if window < 2 {
        return Err(BacktestError::InsufficientObservations {
            required: 2,
            actual: window,
        });
    }
    let mut ratios = Vec::with_capacity(series.len());
    let mut idx = Vec::with_capacity(series.len());
    for i in 0..series.len() {
        if !series.usable[i] {
            continue;
        }
        let f = series.forecast_stdevs[i];
        if !(f > 0.0) {
            return Err(BacktestError::NonPositiveForecast { value: f, index: i });
        }
        ratios.push(series.realized_next_returns[i] / f);
        idx.push(i);
    }
    let mut out = Vec::new();
    for end in window..=ratios.len() {
        out.push((idx[end - 1], sample_std(&ratios[end - window..end])));
    }
    Ok(out)
}

/// Rolling backtest over one panel.
///
/// For each `t` in `[window_t, T)`: estimate `Ω̂` on `[t - window_t, t)`
/// (incrementally maintained Gram matrix; drop-mode invalid entries
/// contribute zero), build the strategy portfolio on that estimate, record
/// each forecaster's `Σ̂_t` and the realized `ŵ' r_t`. Evaluation periods in
/// which any held asset is invalid are marked unusable.
pub fn rolling_backtest(
    panel: &ReturnsPanel,
    valid: Option<&DMatrix<bool>>,
    strategy: &StrategySpec,
    window_t: usize,
    demean: bool,
    forecasters: &[ForecasterKind],
) -> Result<Vec<BiasStatSeries>, BacktestError> {
    rolling_backtest_with_teff(panel, valid, strategy, window_t, demean, forecasters, None)
}

/// [`rolling_backtest`] with an explicit effective observation count for the
/// corrected forecasters (fat-tailed or weighted estimators narrow the
/// window below the raw `window_t`).
pub fn rolling_backtest_with_teff(
    panel: &ReturnsPanel,
    valid: Option<&DMatrix<bool>>,
    strategy: &StrategySpec,
    window_t: usize,
    demean: bool,
    forecasters: &[ForecasterKind],
    t_eff: Option<f64>,
) -> Result<Vec<BiasStatSeries>, BacktestError> {
    let n = panel.n_assets();
    let t_total = panel.n_periods();
    if window_t < 2 || window_t + 1 > t_total {
        return Err(BacktestError::WindowExceedsHistory {
            window: window_t,
            len: t_total,
        });
    }
    if let Some(v) = valid {
        if v.nrows() != n || v.ncols() != t_total {
            return Err(BacktestError::DimensionMismatch {
                expected: n * t_total,
                actual: v.nrows() * v.ncols(),
            });
        }
    }
    if let StrategySpec::Optimized { alpha } = strategy {
        if alpha.len() != n {
            return Err(BacktestError::DimensionMismatch {
                expected: n,
                actual: alpha.len(),
            });
        }
    }
    if let StrategySpec::FixedControl { weights } = strategy {
        if weights.len() != n {
            return Err(BacktestError::DimensionMismatch {
                expected: n,
                actual: weights.len(),
            });
        }
    }

    let masked = |i: usize, s: usize| -> f64 {
        if valid.map_or(true, |v| v[(i, s)]) {
            panel.values()[(i, s)]
        } else {
            0.0
        }
    };

    // Incrementally maintained window sums: Gram matrix of (masked) columns
    // and per-asset sums for optional demeaning.
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut col_sum = DVector::<f64>::zeros(n);
    for s in 0..window_t {
        let col = DVector::from_fn(n, |i, _| masked(i, s));
        gram.ger(1.0, &col, &col, 1.0);
        col_sum += &col;
    }

    let mut series: Vec<BiasStatSeries> = forecasters
        .iter()
        .map(|&f| BiasStatSeries {
            forecaster: f,
            timestamps: Vec::new(),
            forecast_stdevs: Vec::new(),
            realized_next_returns: Vec::new(),
            usable: Vec::new(),
        })
        .collect();

    let tw = window_t as f64;
    let correction_t = t_eff.unwrap_or(tw);
    for t in window_t..t_total {
        // covariance of the window [t - window_t, t)
        let mut cov_matrix = gram.clone();
        if demean {
            // (1/T) Σ r r' - (1/T²) S S'
            cov_matrix.ger(-1.0 / tw, &col_sum, &col_sum, 1.0);
        }
        cov_matrix /= tw;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (cov_matrix[(i, j)] + cov_matrix[(j, i)]);
                cov_matrix[(i, j)] = v;
                cov_matrix[(j, i)] = v;
            }
        }

        let (weights, naive_var) = match strategy {
            StrategySpec::Optimized { alpha } => {
                let solver = SpdSolver::with_default_cap(&cov_matrix)?;
                let w = solver.solve(alpha.values());
                let nv = (&cov_matrix * &w).dot(&w);
                (w, nv)
            }
            StrategySpec::FixedControl { weights } => {
                let nv = (&cov_matrix * weights).dot(weights);
                (weights.clone(), nv)
            }
        };

        // usable only when every held asset has a valid realized return
        let usable = valid.map_or(true, |v| (0..n).all(|i| v[(i, t)] || weights[i] == 0.0));
        let realized = (0..n).map(|i| weights[i] * panel.values()[(i, t)]).sum::<f64>();
        let naive_stdev = naive_var.max(0.0).sqrt();

        for s in series.iter_mut() {
            let forecast = match s.forecaster {
                ForecasterKind::Naive => naive_stdev,
                ForecasterKind::CorrectedAsset => {
                    naive_stdev * asset_correction_factor(n, correction_t)?.stdev_factor
                }
                ForecasterKind::CorrectedAssetExact => {
                    naive_stdev
                        * crate::second_order::exact_asset_correction(n, correction_t)?
                            .variance_factor
                            .sqrt()
                }
            };
            s.timestamps.push(panel.dates()[t].clone());
            s.forecast_stdevs.push(forecast);
            s.realized_next_returns.push(realized);
            s.usable.push(usable);
        }

        // slide the window: add column t, drop column t - window_t
        if t + 1 < t_total {
            let add = DVector::from_fn(n, |i, _| masked(i, t));
            let drop = DVector::from_fn(n, |i, _| masked(i, t - window_t));
            gram.ger(1.0, &add, &add, 1.0);
            gram.ger(-1.0, &drop, &drop, 1.0);
            col_sum += &add;
            col_sum -= &drop;
        }
    }
    Ok(series)
}

/// Builds a [`CovarianceEstimate`] for one window the same way the rolling
/// engine does; used by tests to cross-check the incremental path.
pub fn window_covariance(
    panel: &ReturnsPanel,
    start: usize,
    window_t: usize,
    demean: bool,
) -> Result<CovarianceEstimate, BacktestError> {
    let sub = panel.window(start, start + window_t);
    Ok(crate::covariance::estimate_sample_covariance(&sub, demean)?)
}
