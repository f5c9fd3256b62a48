//! CSV-driven rolling backtest: one panel, one strategy, bias statistics for
//! the naive and corrected forecasters.

use super::{purpose, seeded_rng, Column, ExperimentError, ExperimentResult, ResultTable, SummaryItem};
use crate::backtest::{
    bias_statistic, rolling_backtest, trailing_bias_statistic, BiasStatSeries, ForecasterKind,
    StrategySpec,
};
use crate::config::{BacktestConfig, ExperimentConfig};
use crate::io::LoadedPanel;
use crate::portfolio::{random_control_portfolio, AlphaVector};
use rand::seq::SliceRandom;

pub fn run(
    cfg: &BacktestConfig,
    config: &ExperimentConfig,
    loaded: &LoadedPanel,
) -> Result<ExperimentResult, ExperimentError> {
    let mut rng = seeded_rng(config.master_seed, purpose::SETUP, 0);
    let total_assets = loaded.panel.n_assets();
    let (panel, valid) = match cfg.n_assets {
        None => (loaded.panel.clone(), loaded.valid.clone()),
        Some(n) => {
            if n > total_assets {
                return Err(ExperimentError::NotEnoughAssets {
                    available: total_assets,
                    requested: n,
                });
            }
            let mut idx: Vec<usize> = (0..total_assets).collect();
            idx.shuffle(&mut rng);
            idx.truncate(n);
            idx.sort_unstable();
            let sub_valid = nalgebra::DMatrix::from_fn(n, loaded.panel.n_periods(), |r, c| {
                loaded.valid[(idx[r], c)]
            });
            (loaded.panel.select_assets(&idx), sub_valid)
        }
    };
    let n = panel.n_assets();
    if panel.n_periods() <= cfg.window_t + 1 {
        return Err(ExperimentError::PanelTooShort {
            required: cfg.window_t + 2,
            actual: panel.n_periods(),
        });
    }

    let (strategy, forecasters, optimized): (StrategySpec, Vec<ForecasterKind>, bool) =
        if cfg.strategy == "optimized" {
            let alpha = AlphaVector::new(crate::sim::gaussian_vector(n, &mut rng))
                .expect("gaussian alpha is valid");
            (
                StrategySpec::Optimized { alpha },
                vec![ForecasterKind::Naive, ForecasterKind::CorrectedAsset],
                true,
            )
        } else {
            let control = random_control_portfolio(n, &mut rng);
            (
                StrategySpec::FixedControl {
                    weights: control.weights().clone(),
                },
                vec![ForecasterKind::Naive],
                false,
            )
        };

    let series = rolling_backtest(
        &panel,
        Some(&valid),
        &strategy,
        cfg.window_t,
        cfg.demean,
        &forecasters,
    )?;

    let mut tables = Vec::new();
    let mut summary = vec![
        SummaryItem::plain("n_assets", n as f64),
        SummaryItem::plain("window_t", cfg.window_t as f64),
        SummaryItem::plain(
            "excluded_incomplete_assets",
            loaded.excluded_assets.len() as f64,
        ),
        SummaryItem::plain("dropped_observations", loaded.n_dropped as f64),
        SummaryItem::plain("clamped_observations", loaded.n_clamped as f64),
    ];

    for s in &series {
        let label = forecaster_label(s.forecaster, optimized);
        let b = bias_statistic(s)?;
        summary.push(SummaryItem::plain(&format!("bias_{label}"), b));
        tables.push(series_table(s, &label));
        if s.len() >= cfg.trailing_window {
            let trailing = trailing_bias_statistic(s, cfg.trailing_window)?;
            tables.push(ResultTable::new(
                &format!("trailing_{label}"),
                vec![
                    Column::u64(
                        "t",
                        "series index at the trailing-window end",
                        trailing.iter().map(|&(i, _)| i as u64).collect(),
                    ),
                    Column::str(
                        "date",
                        "date of the last window observation",
                        trailing.iter().map(|&(i, _)| s.timestamps[i].clone()).collect(),
                    ),
                    Column::f64(
                        "bias",
                        "trailing bias statistic",
                        trailing.iter().map(|&(_, b)| b).collect(),
                    ),
                ],
            ));
        }
    }

    Ok(ExperimentResult {
        experiment: "backtest".into(),
        master_seed: config.master_seed,
        config_canonical: config.to_canonical_string(),
        tables,
        summary,
    })
}

fn forecaster_label(kind: ForecasterKind, optimized: bool) -> String {
    let base = match kind {
        ForecasterKind::Naive => "naive",
        ForecasterKind::CorrectedAsset => "corrected",
        ForecasterKind::CorrectedAssetExact => "corrected_exact",
    };
    if optimized {
        base.to_string()
    } else {
        format!("control_{base}")
    }
}

fn series_table(s: &BiasStatSeries, label: &str) -> ResultTable {
    ResultTable::new(
        &format!("series_{label}"),
        vec![
            Column::str("date", "realization date paired with the forecast", s.timestamps.clone()),
            Column::f64("forecast_stdev", "forecast standard deviation", s.forecast_stdevs.clone()),
            Column::f64("realized_return", "next-period realized portfolio return", s.realized_next_returns.clone()),
            Column::u64(
                "usable",
                "1 when the period enters the bias window",
                s.usable.iter().map(|&u| u as u64).collect(),
            ),
        ],
    )
}
