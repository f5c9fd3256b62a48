//! Return panels: the raw input to every estimator and backtest.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("panel needs at least {required} observation periods, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    #[error("panel needs at least one asset")]
    NoAssets,
    #[error("asset count {assets} does not match value rows {rows}")]
    AssetMismatch { assets: usize, rows: usize },
    #[error("date count {dates} does not match value columns {cols}")]
    DateMismatch { dates: usize, cols: usize },
    #[error("dates must be strictly increasing: {prev:?} >= {next:?} at position {pos}")]
    NonMonotonicDates { prev: String, next: String, pos: usize },
    #[error("non-finite return for asset {asset:?} at date {date:?}")]
    NonFinite { asset: String, date: String },
}

/// An `N x T` panel of simple returns with asset and period labels.
///
/// Values are dimensionless simple returns (0.01 = 1%). Every entry is
/// present and finite; assets with incomplete history are excluded upstream.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    assets: Vec<String>,
    dates: Vec<String>,
    values: DMatrix<f64>,
}

impl ReturnsPanel {
    /// Builds a panel, validating shape, label monotonicity and finiteness.
    pub fn new(
        assets: Vec<String>,
        dates: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self, PanelError> {
        if assets.is_empty() {
            return Err(PanelError::NoAssets);
        }
        if dates.len() < 2 {
            return Err(PanelError::InsufficientData {
                required: 2,
                actual: dates.len(),
            });
        }
        if values.nrows() != assets.len() {
            return Err(PanelError::AssetMismatch {
                assets: assets.len(),
                rows: values.nrows(),
            });
        }
        if values.ncols() != dates.len() {
            return Err(PanelError::DateMismatch {
                dates: dates.len(),
                cols: values.ncols(),
            });
        }
        for pos in 1..dates.len() {
            if dates[pos - 1] >= dates[pos] {
                return Err(PanelError::NonMonotonicDates {
                    prev: dates[pos - 1].clone(),
                    next: dates[pos].clone(),
                    pos,
                });
            }
        }
        for i in 0..values.nrows() {
            for t in 0..values.ncols() {
                if !values[(i, t)].is_finite() {
                    return Err(PanelError::NonFinite {
                        asset: assets[i].clone(),
                        date: dates[t].clone(),
                    });
                }
            }
        }
        Ok(Self {
            assets,
            dates,
            values,
        })
    }

    /// Panel from a bare matrix with generated labels (`A0001…`, `t000001…`).
    pub fn from_values(values: DMatrix<f64>) -> Result<Self, PanelError> {
        let assets = (0..values.nrows()).map(|i| format!("A{:04}", i + 1)).collect();
        let dates = (0..values.ncols()).map(|t| format!("t{:06}", t + 1)).collect();
        Self::new(assets, dates, values)
    }

    pub fn n_assets(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.values.ncols()
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Return column (one period, all assets).
    pub fn period(&self, t: usize) -> DVector<f64> {
        self.values.column(t).into_owned()
    }

    /// Sub-panel over the half-open period range `[start, end)`.
    pub fn window(&self, start: usize, end: usize) -> ReturnsPanel {
        assert!(start < end && end <= self.n_periods(), "window out of range");
        ReturnsPanel {
            assets: self.assets.clone(),
            dates: self.dates[start..end].to_vec(),
            values: self.values.columns(start, end - start).into_owned(),
        }
    }

    /// Sub-panel keeping only the given asset rows (indices into `assets`).
    pub fn select_assets(&self, idx: &[usize]) -> ReturnsPanel {
        assert!(!idx.is_empty(), "must keep at least one asset");
        let assets = idx.iter().map(|&i| self.assets[i].clone()).collect();
        let values = DMatrix::from_fn(idx.len(), self.n_periods(), |r, t| {
            self.values[(idx[r], t)]
        });
        ReturnsPanel {
            assets,
            dates: self.dates.clone(),
            values,
        }
    }
}
