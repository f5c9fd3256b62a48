//! Efficient-frontier Monte Carlo: constrained minimum-variance portfolios
//! built on noisy covariance estimates, scored against the true frontier.
//!
//! For each target return `R`: the true frontier risk comes from the exact
//! minimum-variance portfolio on the true `Ω`; each trial draws a sample
//! covariance (Wishart, `T` observations), optimizes on it under
//! `{1'w = 1, α'w = R}`, and records naive `√(ŵ'Ω̂ŵ)`, realized `√(ŵ'Ωŵ)`
//! and corrected `naive · (1 - N/T)⁻¹` risks.

use super::{mean_se, par_map_trials, purpose, seeded_rng, Column, ExperimentError, ExperimentResult, ResultTable, SummaryItem};
use crate::config::{ExperimentConfig, FrontierConfig};
use crate::covariance::{CovarianceEstimate, EstimatorKind};
use crate::portfolio::{min_variance_portfolio, portfolio_variance, AlphaVector, LinearConstraints};
use crate::second_order::asset_correction_factor;
use nalgebra::Cholesky;

pub fn run(cfg: &FrontierConfig, config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    let n = cfg.n_assets;
    let t = cfg.t_obs;

    let mut setup_rng = seeded_rng(config.master_seed, purpose::SETUP, 0);
    let omega = crate::sim::random_spd(n, cfg.eig_min, cfg.eig_max, &mut setup_rng);
    let alpha = AlphaVector::new(crate::sim::gaussian_vector(n, &mut setup_rng))
        .expect("gaussian alpha is valid");
    let omega_chol = Cholesky::new(omega.clone()).expect("omega is SPD");

    // frontier geometry on the true covariance:
    // min-variance return R0 = q/p, curvature scale rho0 = sqrt(p r - q²)/p
    let ones = nalgebra::DVector::from_element(n, 1.0);
    let u = omega_chol.solve(&ones);
    let v = omega_chol.solve(alpha.values());
    let p = ones.dot(&u);
    let q = ones.dot(&v);
    let r_scalar = alpha.values().dot(&v);
    let r0 = q / p;
    let rho0 = ((p * r_scalar - q * q).max(0.0)).sqrt() / p;

    let stdev_correction = asset_correction_factor(n, t as f64)?.stdev_factor;

    let mut per_r_target = Vec::new();
    let mut per_r_true = Vec::new();
    let mut per_r_naive_mean = Vec::new();
    let mut per_r_naive_se = Vec::new();
    let mut per_r_realized_mean = Vec::new();
    let mut per_r_realized_se = Vec::new();
    let mut per_r_corrected_mean = Vec::new();
    let mut per_r_corrected_se = Vec::new();
    let mut per_r_min_excess = Vec::new();

    let mut trial_r_index = Vec::new();
    let mut trial_index = Vec::new();
    let mut trial_naive = Vec::new();
    let mut trial_realized = Vec::new();
    let mut trial_corrected = Vec::new();

    for (r_idx, mult) in cfg.r_multipliers.iter().enumerate() {
        let r_target = r0 + mult * rho0;
        let constraints = LinearConstraints::fully_invested_with_return(&alpha, r_target)?;
        let true_cov = CovarianceEstimate::new(omega.clone(), 1.0, EstimatorKind::Sample, false)?;
        let w_star = min_variance_portfolio(&true_cov, &constraints)?;
        let true_risk = portfolio_variance(&w_star, &omega)?.sqrt();

        let rows: Vec<Result<(f64, f64, f64), ExperimentError>> =
            par_map_trials(cfg.n_trials, |trial| {
                let stream = ((r_idx as u64) << 20) | trial as u64;
                let mut rng = seeded_rng(config.master_seed, purpose::TRIAL, stream);
                let sample = crate::sim::wishart_sample(&omega_chol, t, &mut rng);
                let est = CovarianceEstimate::new(sample, t as f64, EstimatorKind::Sample, false)?;
                let w_hat = min_variance_portfolio(&est, &constraints)?;
                let naive = portfolio_variance(&w_hat, est.matrix())?.sqrt();
                let realized = portfolio_variance(&w_hat, &omega)?.sqrt();
                Ok((naive, realized, naive * stdev_correction))
            });

        let mut naives = Vec::with_capacity(cfg.n_trials);
        let mut realizeds = Vec::with_capacity(cfg.n_trials);
        let mut correcteds = Vec::with_capacity(cfg.n_trials);
        for (trial, row) in rows.into_iter().enumerate() {
            let (naive, realized, corrected) = row?;
            trial_r_index.push(r_idx as u64);
            trial_index.push(trial as u64);
            trial_naive.push(naive);
            trial_realized.push(realized);
            trial_corrected.push(corrected);
            naives.push(naive);
            realizeds.push(realized);
            correcteds.push(corrected);
        }

        let (nm, ns) = mean_se(&naives);
        let (rm, rs) = mean_se(&realizeds);
        let (cm, cs) = mean_se(&correcteds);
        let min_excess = realizeds
            .iter()
            .map(|&x| x - true_risk)
            .fold(f64::INFINITY, f64::min);
        per_r_target.push(r_target);
        per_r_true.push(true_risk);
        per_r_naive_mean.push(nm);
        per_r_naive_se.push(ns);
        per_r_realized_mean.push(rm);
        per_r_realized_se.push(rs);
        per_r_corrected_mean.push(cm);
        per_r_corrected_se.push(cs);
        per_r_min_excess.push(min_excess);
    }

    let pooled_naive: f64 = trial_naive.iter().sum::<f64>() / trial_naive.len() as f64;
    let pooled_realized: f64 = trial_realized.iter().sum::<f64>() / trial_realized.len() as f64;
    let pooled_corrected: f64 = trial_corrected.iter().sum::<f64>() / trial_corrected.len() as f64;
    let worst_min_excess = per_r_min_excess.iter().copied().fold(f64::INFINITY, f64::min);

    let per_r = ResultTable::new(
        "per_r",
        vec![
            Column::f64("r_target", "target expected return of the constraint", per_r_target),
            Column::f64("true_frontier", "exact frontier risk sqrt(w*'Ωw*)", per_r_true),
            Column::f64("mean_naive", "mean naive forecast stdev", per_r_naive_mean),
            Column::f64("se_naive", "standard error of mean_naive", per_r_naive_se),
            Column::f64("mean_realized", "mean realized stdev", per_r_realized_mean),
            Column::f64("se_realized", "standard error of mean_realized", per_r_realized_se),
            Column::f64("mean_corrected", "mean corrected forecast stdev", per_r_corrected_mean),
            Column::f64("se_corrected", "standard error of mean_corrected", per_r_corrected_se),
            Column::f64(
                "min_excess_over_true",
                "min over trials of realized - true frontier risk (optimality margin)",
                per_r_min_excess,
            ),
        ],
    );
    let trials_table = ResultTable::new(
        "trials",
        vec![
            Column::u64("r_index", "index into the per_r table", trial_r_index),
            Column::u64("trial", "trial index within the R point", trial_index),
            Column::f64("naive", "naive forecast stdev", trial_naive),
            Column::f64("realized", "realized stdev on the true covariance", trial_realized),
            Column::f64("corrected", "corrected forecast stdev", trial_corrected),
        ],
    );

    Ok(ExperimentResult {
        experiment: "frontier".into(),
        master_seed: config.master_seed,
        config_canonical: config.to_canonical_string(),
        tables: vec![per_r, trials_table],
        summary: vec![
            SummaryItem::plain("pooled_naive_over_realized", pooled_naive / pooled_realized),
            SummaryItem::plain(
                "pooled_corrected_over_realized",
                pooled_corrected / pooled_realized,
            ),
            SummaryItem::plain("worst_min_excess_over_true", worst_min_excess),
            SummaryItem::plain("stdev_correction_factor", stdev_correction),
            SummaryItem::plain("gmv_return", r0),
            SummaryItem::plain("return_scale", rho0),
        ],
    })
}
