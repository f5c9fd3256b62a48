//! Second-order risk: estimation-error-aware risk forecasts for optimized portfolios.
//!
//! Optimizing a portfolio against an estimated covariance matrix tilts the
//! weights toward whatever that estimate got wrong, so the conventional
//! forecast `w' Ω̂ w` is systematically biased low for optimized portfolios
//! even when `Ω̂` itself is unbiased. This crate implements:
//!
//! - covariance estimation (sample, EWMA) and effective-window accounting
//!   for EWMA / Newey-West / fat-tailed estimators ([`covariance`]);
//! - closed-form portfolio construction and exact risk decomposition
//!   ([`portfolio`]);
//! - the `(1 - N/T)^-2` asset-level and `(1 - K/T)^-2` factor-level
//!   second-order corrections, their exact inverse-Wishart counterparts, and
//!   the coherent-exposure-error correction ([`second_order`]);
//! - linear factor models: cross-sectional factor-return estimation, alpha
//!   decomposition against the exposure span, alpha-factor augmentation, and
//!   synthetic factor worlds with controlled exposure noise ([`factor`]);
//! - rolling out-of-sample backtests and bias statistics ([`backtest`]);
//! - seeded, deterministic Monte Carlo experiments that validate all of the
//!   above ([`experiments`]), plus the config and CSV parsers used by the
//!   `secor` CLI ([`config`], [`io`]).

pub mod backtest;
pub mod config;
pub mod covariance;
pub mod experiments;
pub mod factor;
pub mod io;
pub mod linalg;
pub mod panel;
pub mod portfolio;
pub mod second_order;
pub mod sim;

pub use config::{parse_config, ExperimentConfig, ExperimentKind};
pub use covariance::{CovarianceEstimate, EffectiveWindowSpec, EstimatorKind};
pub use factor::{AlphaDecomposition, FactorModel, SyntheticFactorWorld};
pub use panel::ReturnsPanel;
pub use portfolio::{AlphaVector, LinearConstraints, Portfolio, Strategy};
pub use second_order::{CorrectionFactors, ForecastLevel, RiskForecast};
