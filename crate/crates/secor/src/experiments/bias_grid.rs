//! Bias-statistic grid over (N, T/N) cells.
//!
//! Per cell and trial: draw a correlated Gaussian (or fat-tailed) panel,
//! run the daily rolling backtest with the `Ω̂⁻¹α` strategy, and compute
//! full-sample bias statistics for the naive forecast, the corrected
//! forecast, and a fixed random-control portfolio scored by the same rolling
//! estimator. Cell aggregates average over trials.
//!
//! With real data (`run_on_panel`), each trial instead picks a random asset
//! subset of the supplied panel.

use super::{mean_se, par_map_trials, purpose, seeded_rng, Column, ExperimentError, ExperimentResult, ResultTable, SummaryItem};
use crate::backtest::{bias_statistic, rolling_backtest_with_teff, ForecasterKind, StrategySpec};
use crate::config::{BiasGridConfig, ExperimentConfig};
use crate::covariance::{effective_t, EffectiveWindowSpec};
use crate::io::LoadedPanel;
use crate::panel::ReturnsPanel;
use crate::portfolio::{random_control_portfolio, AlphaVector};
use nalgebra::Cholesky;
use rand::seq::SliceRandom;

/// One cell of the grid.
#[derive(Debug, Clone, Copy)]
struct Cell {
    n: usize,
    t: usize,
    t_over_n: f64,
}

fn cells(cfg: &BiasGridConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &n in &cfg.n_list {
        for &r in &cfg.t_over_n {
            out.push(Cell {
                n,
                t: (n as f64 * r).round() as usize,
                t_over_n: r,
            });
        }
    }
    out
}

struct TrialOutcome {
    b_naive: f64,
    b_corrected: f64,
    b_control: f64,
}

fn run_cell_trial(
    cell: Cell,
    cfg: &BiasGridConfig,
    master_seed: u64,
    stream: u64,
    data: Option<&LoadedPanel>,
) -> Result<TrialOutcome, ExperimentError> {
    let mut rng = seeded_rng(master_seed, purpose::TRIAL, stream);
    let (panel, valid) = match data {
        None => {
            let omega = crate::sim::random_spd(cell.n, cfg.eig_min, cfg.eig_max, &mut rng);
            let chol = Cholesky::new(omega).expect("omega is SPD");
            let total = cell.t + cfg.eval_len;
            let values = match cfg.kurtosis {
                None => crate::sim::gaussian_panel(&chol, total, &mut rng),
                Some(k) => crate::sim::student_panel(&chol, total, k, &mut rng),
            };
            (ReturnsPanel::from_values(values)?, None)
        }
        Some(loaded) => {
            let available = loaded.panel.n_assets();
            if available < cell.n {
                return Err(ExperimentError::NotEnoughAssets {
                    available,
                    requested: cell.n,
                });
            }
            if loaded.panel.n_periods() < cell.t + 10 {
                return Err(ExperimentError::PanelTooShort {
                    required: cell.t + 10,
                    actual: loaded.panel.n_periods(),
                });
            }
            let mut idx: Vec<usize> = (0..available).collect();
            idx.shuffle(&mut rng);
            idx.truncate(cell.n);
            idx.sort_unstable();
            let sub = loaded.panel.select_assets(&idx);
            let sub_valid = nalgebra::DMatrix::from_fn(cell.n, loaded.panel.n_periods(), |r, c| {
                loaded.valid[(idx[r], c)]
            });
            (sub, Some(sub_valid))
        }
    };

    let alpha = AlphaVector::new(crate::sim::gaussian_vector(cell.n, &mut rng))
        .expect("gaussian alpha is valid");
    let control = random_control_portfolio(cell.n, &mut rng);

    // fat tails shrink the effective window for the correction
    let t_eff = match cfg.kurtosis {
        None => None,
        Some(k) => Some(effective_t(&EffectiveWindowSpec {
            base_t: cell.t,
            ewma_half_life: None,
            newey_west_lags: None,
            kurtosis: Some(k),
        })?),
    };

    let optimized = rolling_backtest_with_teff(
        &panel,
        valid.as_ref(),
        &StrategySpec::Optimized { alpha },
        cell.t,
        cfg.demean,
        &[ForecasterKind::Naive, ForecasterKind::CorrectedAsset],
        t_eff,
    )?;
    let control_series = rolling_backtest_with_teff(
        &panel,
        valid.as_ref(),
        &StrategySpec::FixedControl {
            weights: control.weights().clone(),
        },
        cell.t,
        cfg.demean,
        &[ForecasterKind::Naive],
        t_eff,
    )?;

    Ok(TrialOutcome {
        b_naive: bias_statistic(&optimized[0])?,
        b_corrected: bias_statistic(&optimized[1])?,
        b_control: bias_statistic(&control_series[0])?,
    })
}

pub fn run(cfg: &BiasGridConfig, config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    run_impl(cfg, config, None)
}

/// Real-data variant: the grid's trials subsample the supplied panel.
pub fn run_on_panel(
    cfg: &BiasGridConfig,
    config: &ExperimentConfig,
    data: &LoadedPanel,
) -> Result<ExperimentResult, ExperimentError> {
    run_impl(cfg, config, Some(data))
}

fn run_impl(
    cfg: &BiasGridConfig,
    config: &ExperimentConfig,
    data: Option<&LoadedPanel>,
) -> Result<ExperimentResult, ExperimentError> {
    let grid = cells(cfg);

    let mut cell_n = Vec::new();
    let mut cell_t = Vec::new();
    let mut cell_ratio = Vec::new();
    let mut naive_mean = Vec::new();
    let mut naive_se = Vec::new();
    let mut corr_mean = Vec::new();
    let mut corr_se = Vec::new();
    let mut ctrl_mean = Vec::new();
    let mut ctrl_se = Vec::new();
    let mut ctrl_ref = Vec::new();

    let mut trial_n = Vec::new();
    let mut trial_t = Vec::new();
    let mut trial_idx = Vec::new();
    let mut trial_naive = Vec::new();
    let mut trial_corr = Vec::new();
    let mut trial_ctrl = Vec::new();

    let mut worst_abs_corr_minus_ctrl = 0.0_f64;
    let mut min_naive = f64::INFINITY;

    for (cell_idx, &cell) in grid.iter().enumerate() {
        let outcomes: Vec<Result<TrialOutcome, ExperimentError>> =
            par_map_trials(cfg.n_trials, |trial| {
                let stream = ((cell_idx as u64) << 20) | trial as u64;
                run_cell_trial(cell, cfg, config.master_seed, stream, data)
            });
        let mut naives = Vec::with_capacity(cfg.n_trials);
        let mut corrs = Vec::with_capacity(cfg.n_trials);
        let mut ctrls = Vec::with_capacity(cfg.n_trials);
        for (trial, outcome) in outcomes.into_iter().enumerate() {
            let o = outcome?;
            trial_n.push(cell.n as u64);
            trial_t.push(cell.t as u64);
            trial_idx.push(trial as u64);
            trial_naive.push(o.b_naive);
            trial_corr.push(o.b_corrected);
            trial_ctrl.push(o.b_control);
            naives.push(o.b_naive);
            corrs.push(o.b_corrected);
            ctrls.push(o.b_control);
        }
        let (nm, ns) = mean_se(&naives);
        let (cm, cs) = mean_se(&corrs);
        let (km, ks) = mean_se(&ctrls);
        cell_n.push(cell.n as u64);
        cell_t.push(cell.t as u64);
        cell_ratio.push(cell.t_over_n);
        naive_mean.push(nm);
        naive_se.push(ns);
        corr_mean.push(cm);
        corr_se.push(cs);
        ctrl_mean.push(km);
        ctrl_se.push(ks);
        // finite-window reference level of the control bias statistic:
        // ratios are Student-t with ~T dof, so B concentrates at
        // sqrt(T/(T-2)) rather than exactly 1
        ctrl_ref.push((cell.t as f64 / (cell.t as f64 - 2.0)).sqrt());
        worst_abs_corr_minus_ctrl = worst_abs_corr_minus_ctrl.max((cm - km).abs());
        min_naive = min_naive.min(nm);
    }

    let cells_table = ResultTable::new(
        "cells",
        vec![
            Column::u64("n_assets", "portfolio size N", cell_n),
            Column::u64("window_t", "rolling estimation window T", cell_t),
            Column::f64("t_over_n", "T/N ratio of the cell", cell_ratio),
            Column::f64("b_naive_mean", "mean full-sample bias statistic, naive forecast", naive_mean),
            Column::f64("b_naive_se", "standard error over trials", naive_se),
            Column::f64("b_corrected_mean", "mean bias statistic, corrected forecast", corr_mean),
            Column::f64("b_corrected_se", "standard error over trials", corr_se),
            Column::f64("b_control_mean", "mean bias statistic, random-control portfolio", ctrl_mean),
            Column::f64("b_control_se", "standard error over trials", ctrl_se),
            Column::f64(
                "b_control_finite_window_ref",
                "sqrt(T/(T-2)): where a calibrated control concentrates at window T",
                ctrl_ref,
            ),
        ],
    );
    let trials_table = ResultTable::new(
        "trials",
        vec![
            Column::u64("n_assets", "cell N", trial_n),
            Column::u64("window_t", "cell T", trial_t),
            Column::u64("trial", "trial index", trial_idx),
            Column::f64("b_naive", "full-sample bias statistic, naive", trial_naive),
            Column::f64("b_corrected", "full-sample bias statistic, corrected", trial_corr),
            Column::f64("b_control", "full-sample bias statistic, control", trial_ctrl),
        ],
    );

    Ok(ExperimentResult {
        experiment: "bias_grid".into(),
        master_seed: config.master_seed,
        config_canonical: config.to_canonical_string(),
        tables: vec![cells_table, trials_table],
        summary: vec![
            SummaryItem::plain("min_naive_bias", min_naive),
            SummaryItem::plain("max_abs_corrected_minus_control", worst_abs_corr_minus_ctrl),
            SummaryItem::plain("n_cells", grid.len() as f64),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentKind, ExperimentParams};
    use approx::assert_relative_eq;

    /// One small cell, full pipeline: naive biased high, corrected close to
    /// control, control near its finite-window reference.
    #[test]
    fn single_cell_levels() {
        let mut config = ExperimentConfig::default_for(ExperimentKind::AssetBiasGrid, 31);
        if let ExperimentParams::BiasGrid(ref mut b) = config.params {
            b.n_list = vec![10];
            b.t_over_n = vec![2.5];
            b.n_trials = 20;
            b.eval_len = 220;
        }
        let params = match &config.params {
            ExperimentParams::BiasGrid(b) => b.clone(),
            _ => unreachable!(),
        };
        let result = run(&params, &config).unwrap();
        let cells = result.table("cells").unwrap();
        let naive = cells.f64_column("b_naive_mean").unwrap()[0];
        let corrected = cells.f64_column("b_corrected_mean").unwrap()[0];
        let control = cells.f64_column("b_control_mean").unwrap()[0];
        let reference = cells.f64_column("b_control_finite_window_ref").unwrap()[0];
        // T = 25: naive concentrates near sqrt(E[Q]) ~ 1.69
        assert!(naive > 1.4, "naive B = {naive}");
        assert!((corrected - control).abs() < 0.1, "corr {corrected} vs ctrl {control}");
        assert!((control - reference).abs() < 0.05, "ctrl {control} vs ref {reference}");
    }

    /// T rounding: T = round(N * ratio), half away from zero.
    #[test]
    fn cell_t_rounding() {
        let cfg = BiasGridConfig {
            n_list: vec![10],
            t_over_n: vec![1.75],
            ..BiasGridConfig::default()
        };
        let cs = cells(&cfg);
        assert_eq!(cs[0].t, 18);
    }

    /// Fat-tailed panels wire the kurtosis map into the corrected
    /// forecaster: with k=5 the effective window halves (T_eff = 2T/(k-1)),
    /// so the corrected forecast is exactly naive * (1 - N/T_eff)^-1 and the
    /// naive forecaster under fat tails is more biased than the control.
    #[test]
    fn kurtosis_adjusted_cell() {
        let mut config = ExperimentConfig::default_for(ExperimentKind::AssetBiasGrid, 37);
        if let ExperimentParams::BiasGrid(ref mut b) = config.params {
            b.n_list = vec![10];
            b.t_over_n = vec![4.0];
            b.n_trials = 16;
            b.eval_len = 200;
            b.kurtosis = Some(5.0);
        }
        let params = match &config.params {
            ExperimentParams::BiasGrid(b) => b.clone(),
            _ => unreachable!(),
        };
        let result = run(&params, &config).unwrap();
        let cells = result.table("cells").unwrap();
        let naive = cells.f64_column("b_naive_mean").unwrap()[0];
        let corrected = cells.f64_column("b_corrected_mean").unwrap()[0];
        let control = cells.f64_column("b_control_mean").unwrap()[0];
        // exact wiring: T_eff = 2*40/(5-1) = 20 -> stdev factor 2
        assert_relative_eq!(corrected, naive / 2.0, max_relative = 1e-12);
        assert!(naive > control + 0.2, "fat-tail naive {naive} vs control {control}");
    }
}
