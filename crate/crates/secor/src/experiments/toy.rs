//! Two-asset toy experiment: an active manager who always holds the asset
//! with the lower sample standard deviation systematically underforecasts
//! risk, while a passive holder of asset 1 is noisy but unbiased.

use super::{mean_se, par_map_trials, purpose, seeded_rng, Column, ExperimentResult, ResultTable, SummaryItem};
use crate::config::{ExperimentConfig, ToyConfig};
use rand::Rng;
use rand_distr::StandardNormal;

/// Sample standard deviation convention used throughout: root mean square of
/// the raw returns, divisor `T`, no demeaning (ex-post means are neglected,
/// matching the `r r'/T` covariance estimator).
fn sample_stdev(returns: &[f64]) -> f64 {
    let t = returns.len() as f64;
    (returns.iter().map(|r| r * r).sum::<f64>() / t).sqrt()
}

/// Exact `E[s]` of that sample stdev for Gaussian returns:
/// `sigma * sqrt(2/T) * Gamma((T+1)/2) / Gamma(T/2)`, via the ratio
/// recursion `r(T) = ((T-1)/2) / r(T-1)`, `r(1) = 1/sqrt(pi)`.
pub fn expected_sample_stdev(t_obs: usize, sigma: f64) -> f64 {
    assert!(t_obs >= 1);
    let mut ratio = 1.0 / std::f64::consts::PI.sqrt(); // Gamma(1)/Gamma(1/2)
    for t in 2..=t_obs {
        ratio = (t as f64 - 1.0) / 2.0 / ratio;
    }
    sigma * (2.0 / t_obs as f64).sqrt() * ratio
}

pub fn run(cfg: &ToyConfig, config: &ExperimentConfig) -> ExperimentResult {
    let per_trial: Vec<(f64, f64)> = par_map_trials(cfg.n_trials, |i| {
        let mut rng = seeded_rng(config.master_seed, purpose::TRIAL, i as u64);
        let mut active = f64::INFINITY;
        let mut passive = 0.0;
        let mut buf = vec![0.0; cfg.t_obs];
        for asset in 0..cfg.n_assets {
            for b in buf.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *b = z * cfg.true_sigma;
            }
            let s = sample_stdev(&buf);
            if asset == 0 {
                passive = s;
            }
            // ties break toward the earlier asset
            if s < active {
                active = s;
            }
        }
        (active, passive)
    });

    let actives: Vec<f64> = per_trial.iter().map(|p| p.0).collect();
    let passives: Vec<f64> = per_trial.iter().map(|p| p.1).collect();
    let (active_mean, active_se) = mean_se(&actives);
    let (passive_mean, passive_se) = mean_se(&passives);
    let expected_passive = expected_sample_stdev(cfg.t_obs, cfg.true_sigma);

    let trials_table = ResultTable::new(
        "trials",
        vec![
            Column::u64("trial", "trial index", (0..cfg.n_trials as u64).collect()),
            Column::f64(
                "active_forecast",
                "risk forecast of the active manager (min sample stdev)",
                actives,
            ),
            Column::f64(
                "passive_forecast",
                "risk forecast of the passive holder of asset 1",
                passives,
            ),
        ],
    );

    ExperimentResult {
        experiment: "toy".into(),
        master_seed: config.master_seed,
        config_canonical: config.to_canonical_string(),
        tables: vec![trials_table],
        summary: vec![
            SummaryItem::with_se("active_mean_forecast", active_mean, active_se),
            SummaryItem::with_se("passive_mean_forecast", passive_mean, passive_se),
            SummaryItem::plain("expected_passive_forecast", expected_passive),
            SummaryItem::plain("true_sigma", cfg.true_sigma),
        ],
    }
}
