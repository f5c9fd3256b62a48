//! Seeded Monte Carlo experiments.
//!
//! Every experiment is a pure function of its config and master seed.
//! Per-trial RNGs are derived from the master seed by a splittable counter
//! scheme (one ChaCha stream per purpose/trial pair), trials may execute in
//! parallel, and results are merged in trial-index order — so outputs are
//! bitwise identical regardless of thread count.

pub mod bias_grid;
pub mod data_backtest;
pub mod factor_bias;
pub mod frontier;
pub mod toy;
pub mod wishart;

use crate::config::{ExperimentConfig, ExperimentParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("experiment `{0}` requires a returns panel; pass --data")]
    NeedsData(&'static str),
    #[error("panel too short: need at least {required} periods, got {actual}")]
    PanelTooShort { required: usize, actual: usize },
    #[error("panel has {available} assets, need {requested}")]
    NotEnoughAssets { available: usize, requested: usize },
    #[error(transparent)]
    Covariance(#[from] crate::covariance::CovarianceError),
    #[error(transparent)]
    Portfolio(#[from] crate::portfolio::PortfolioError),
    #[error(transparent)]
    Forecast(#[from] crate::second_order::ForecastError),
    #[error(transparent)]
    Factor(#[from] crate::factor::FactorError),
    #[error(transparent)]
    Backtest(#[from] crate::backtest::BacktestError),
    #[error(transparent)]
    Panel(#[from] crate::panel::PanelError),
}

/// Column payloads. Numeric columns are `f64`/`u64`; labels are strings.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ColumnData {
    F64(Vec<f64>),
    U64(Vec<u64>),
    Str(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::F64(v) => v.len(),
            ColumnData::U64(v) => v.len(),
            ColumnData::Str(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            ColumnData::F64(_) => "f64",
            ColumnData::U64(_) => "u64",
            ColumnData::Str(_) => "string",
        }
    }
}

/// A named, documented column.
#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    pub description: String,
    pub data: ColumnData,
}

impl Column {
    pub fn f64(name: &str, description: &str, data: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            description: description.into(),
            data: ColumnData::F64(data),
        }
    }

    pub fn u64(name: &str, description: &str, data: Vec<u64>) -> Self {
        Column {
            name: name.into(),
            description: description.into(),
            data: ColumnData::U64(data),
        }
    }

    pub fn str(name: &str, description: &str, data: Vec<String>) -> Self {
        Column {
            name: name.into(),
            description: description.into(),
            data: ColumnData::Str(data),
        }
    }
}

/// A rectangular result table.
#[derive(Debug, Clone, Serialize)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<Column>,
}

impl ResultTable {
    pub fn new(name: &str, columns: Vec<Column>) -> Self {
        let t = ResultTable {
            name: name.into(),
            columns,
        };
        debug_assert!(
            t.columns.windows(2).all(|w| w[0].data.len() == w[1].data.len()),
            "ragged table {}",
            t.name
        );
        t
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Convenience accessor for a numeric column.
    pub fn f64_column(&self, name: &str) -> Option<&[f64]> {
        match self.column(name).map(|c| &c.data) {
            Some(ColumnData::F64(v)) => Some(v),
            _ => None,
        }
    }
}

/// One headline number with an optional standard error.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryItem {
    pub key: String,
    pub value: f64,
    pub se: Option<f64>,
}

impl SummaryItem {
    pub fn plain(key: &str, value: f64) -> Self {
        SummaryItem {
            key: key.into(),
            value,
            se: None,
        }
    }

    pub fn with_se(key: &str, value: f64, se: f64) -> Self {
        SummaryItem {
            key: key.into(),
            value,
            se: Some(se),
        }
    }
}

/// Everything an experiment produces: per-trial tables, aggregates, and the
/// config/seed provenance needed to reproduce them.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub master_seed: u64,
    /// Canonical config text; re-parsing it reproduces the run exactly.
    pub config_canonical: String,
    pub tables: Vec<ResultTable>,
    pub summary: Vec<SummaryItem>,
}

impl ExperimentResult {
    pub fn table(&self, name: &str) -> Option<&ResultTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_value(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.key == key).map(|s| s.value)
    }

    pub fn summary_se(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.key == key).and_then(|s| s.se)
    }
}

/// RNG purposes partition the ChaCha stream space so that no two draws in an
/// experiment can collide.
pub(crate) mod purpose {
    pub const SETUP: u64 = 0;
    pub const TRIAL: u64 = 1;
    pub const PORTFOLIO: u64 = 2;
    pub const PANEL: u64 = 3;
}

/// Deterministic per-purpose, per-index RNG: same master seed, dedicated
/// ChaCha stream.
pub fn seeded_rng(master_seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    debug_assert!(index < 1 << 40, "stream index overflow");
    rng.set_stream((purpose << 40) | index);
    rng
}

/// Maps `f` over trial indices, possibly in parallel, collecting results in
/// index order (bitwise deterministic under any thread count).
pub fn par_map_trials<R: Send, F>(n_trials: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..n_trials).into_par_iter().map(f).collect()
}

/// Mean and standard error (sample stdev with divisor n-1, over sqrt n).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    let var = ss / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Runs a synthetic experiment (everything except the CSV-driven backtest,
/// which needs a panel; see [`data_backtest::run`]).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    match &config.params {
        ExperimentParams::Toy(c) => Ok(toy::run(c, config)),
        ExperimentParams::Frontier(c) => frontier::run(c, config),
        ExperimentParams::Wishart(c) => wishart::run(c, config),
        ExperimentParams::BiasGrid(c) => bias_grid::run(c, config),
        ExperimentParams::FactorBias(c) => factor_bias::run(c, config),
        ExperimentParams::Backtest(_) => Err(ExperimentError::NeedsData("backtest")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_rng_streams_are_independent() {
        use rand::RngCore;
        let mut a = seeded_rng(42, purpose::TRIAL, 0);
        let mut b = seeded_rng(42, purpose::TRIAL, 1);
        let mut a2 = seeded_rng(42, purpose::TRIAL, 0);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let xs2: Vec<u64> = (0..8).map(|_| a2.next_u64()).collect();
        assert_eq!(xs, xs2, "same stream must replay identically");
        assert_ne!(xs, ys, "distinct streams must differ");
    }

    #[test]
    fn par_map_preserves_trial_order() {
        let out = par_map_trials(1000, |i| i * i);
        assert!(out.iter().enumerate().all(|(i, &v)| v == i * i));
    }

    #[test]
    fn mean_se_basics() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        let expect_se = (5.0f64 / 3.0 / 4.0).sqrt();
        assert!((se - expect_se).abs() < 1e-12);
    }
}
