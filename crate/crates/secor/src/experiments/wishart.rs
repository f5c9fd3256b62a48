//! Inverse-Wishart identity oracle and the optimized-portfolio forecast
//! ratios that follow from it.
//!
//! Monte Carlo means of `Ω̂⁻¹` and `Ω̂⁻¹ Ω Ω̂⁻¹` are compared elementwise to
//! the exact coefficients `t/(t-n-1)` and `t²(t-1)/((t-n)(t-n-1)(t-n-3))`
//! times `Ω⁻¹`. The same trials record, for the portfolio `w = Ω̂⁻¹α`
//! normalized to unit naive volatility, the per-trial true/naive variance
//! ratio whose ensemble mean the second-order corrections must match.

use super::{mean_se, par_map_trials, purpose, seeded_rng, Column, ExperimentError, ExperimentResult, ResultTable, SummaryItem};
use crate::config::{ExperimentConfig, WishartConfig};
use crate::second_order::{
    asset_correction_factor, exact_asset_correction, inverse_wishart_mean_coefficient,
    inverse_wishart_quadratic_coefficient,
};
use nalgebra::{Cholesky, DMatrix, DVector};

struct ChunkAccumulator {
    sum_inv: DMatrix<f64>,
    sumsq_inv: DMatrix<f64>,
    sum_quad: DMatrix<f64>,
    sumsq_quad: DMatrix<f64>,
    ratios: Vec<(f64, f64)>, // (naive q1, true q2) per trial
}

const CHUNK: usize = 1024;

pub fn run(cfg: &WishartConfig, config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    let n = cfg.n_assets;
    let t = cfg.t_obs;
    let trials = cfg.n_trials;

    let omega = if cfg.random_omega {
        let mut rng = seeded_rng(config.master_seed, purpose::SETUP, 0);
        crate::sim::random_spd(n, 0.5, 2.0, &mut rng)
    } else {
        DMatrix::identity(n, n)
    };
    let omega_chol = Cholesky::new(omega.clone()).expect("omega is SPD");
    let omega_inv = omega_chol.inverse();
    // fixed unit-norm alpha; by rotation invariance any fixed direction
    // samples the same ratio distribution
    let alpha = DVector::from_element(n, 1.0 / (n as f64).sqrt());

    let n_chunks = trials.div_ceil(CHUNK);
    let chunks: Vec<ChunkAccumulator> = par_map_trials(n_chunks, |chunk_idx| {
        let mut acc = ChunkAccumulator {
            sum_inv: DMatrix::zeros(n, n),
            sumsq_inv: DMatrix::zeros(n, n),
            sum_quad: DMatrix::zeros(n, n),
            sumsq_quad: DMatrix::zeros(n, n),
            ratios: Vec::with_capacity(CHUNK),
        };
        let start = chunk_idx * CHUNK;
        let end = (start + CHUNK).min(trials);
        for trial in start..end {
            let mut rng = seeded_rng(config.master_seed, purpose::TRIAL, trial as u64);
            let sample = crate::sim::wishart_sample(&omega_chol, t, &mut rng);
            let inv = Cholesky::new(sample)
                .expect("Wishart sample with t >= n is a.s. positive definite")
                .inverse();
            let quad = &inv * &omega * &inv;
            let q1 = (&inv * &alpha).dot(&alpha);
            let q2 = (&quad * &alpha).dot(&alpha);
            acc.ratios.push((q1, q2));
            for i in 0..n {
                for j in 0..n {
                    let a = inv[(i, j)];
                    let b = quad[(i, j)];
                    acc.sum_inv[(i, j)] += a;
                    acc.sumsq_inv[(i, j)] += a * a;
                    acc.sum_quad[(i, j)] += b;
                    acc.sumsq_quad[(i, j)] += b * b;
                }
            }
        }
        acc
    });

    // sequential, chunk-ordered reduction keeps f64 sums deterministic
    let mut sum_inv = DMatrix::zeros(n, n);
    let mut sumsq_inv = DMatrix::zeros(n, n);
    let mut sum_quad = DMatrix::zeros(n, n);
    let mut sumsq_quad = DMatrix::zeros(n, n);
    let mut ratios: Vec<(f64, f64)> = Vec::with_capacity(trials);
    for c in chunks {
        sum_inv += &c.sum_inv;
        sumsq_inv += &c.sumsq_inv;
        sum_quad += &c.sum_quad;
        sumsq_quad += &c.sumsq_quad;
        ratios.extend(c.ratios);
    }

    let c1 = inverse_wishart_mean_coefficient(n, t as f64)?;
    let c2 = inverse_wishart_quadratic_coefficient(n, t as f64)?;
    let tf = trials as f64;

    let mut rows_i = Vec::new();
    let mut rows_j = Vec::new();
    let mut inv_mean = Vec::new();
    let mut inv_se = Vec::new();
    let mut inv_exact = Vec::new();
    let mut inv_z = Vec::new();
    let mut quad_mean = Vec::new();
    let mut quad_se = Vec::new();
    let mut quad_exact = Vec::new();
    let mut quad_z = Vec::new();
    let mut max_z_inv = 0.0_f64;
    let mut max_z_quad = 0.0_f64;
    let mut max_rel_inv = 0.0_f64;
    let mut max_rel_quad = 0.0_f64;
    // relative deviations are scaled by the largest exact entry so that
    // near-zero off-diagonal targets do not blow the ratio up
    let inv_scale = omega_inv.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    for i in 0..n {
        for j in 0..n {
            let m1 = sum_inv[(i, j)] / tf;
            let v1 = (sumsq_inv[(i, j)] / tf - m1 * m1).max(0.0) / tf;
            let e1 = c1 * omega_inv[(i, j)];
            let z1 = (m1 - e1) / v1.sqrt().max(1e-300);
            let m2 = sum_quad[(i, j)] / tf;
            let v2 = (sumsq_quad[(i, j)] / tf - m2 * m2).max(0.0) / tf;
            let e2 = c2 * omega_inv[(i, j)];
            let z2 = (m2 - e2) / v2.sqrt().max(1e-300);
            max_rel_inv = max_rel_inv.max((m1 - e1).abs() / (c1 * inv_scale));
            max_rel_quad = max_rel_quad.max((m2 - e2).abs() / (c2 * inv_scale));
            rows_i.push(i as u64);
            rows_j.push(j as u64);
            inv_mean.push(m1);
            inv_se.push(v1.sqrt());
            inv_exact.push(e1);
            inv_z.push(z1);
            quad_mean.push(m2);
            quad_se.push(v2.sqrt());
            quad_exact.push(e2);
            quad_z.push(z2);
            max_z_inv = max_z_inv.max(z1.abs());
            max_z_quad = max_z_quad.max(z2.abs());
        }
    }

    let identity_table = ResultTable::new(
        "identities",
        vec![
            Column::u64("row", "matrix row", rows_i),
            Column::u64("col", "matrix column", rows_j),
            Column::f64("inv_mc_mean", "Monte Carlo mean of (sample covariance)^-1", inv_mean),
            Column::f64("inv_se", "standard error of inv_mc_mean", inv_se),
            Column::f64("inv_exact", "exact t/(t-n-1) * Omega^-1", inv_exact),
            Column::f64("inv_z", "(mc - exact)/se", inv_z),
            Column::f64(
                "quad_mc_mean",
                "Monte Carlo mean of inv * Omega * inv",
                quad_mean,
            ),
            Column::f64("quad_se", "standard error of quad_mc_mean", quad_se),
            Column::f64(
                "quad_exact",
                "exact t^2(t-1)/((t-n)(t-n-1)(t-n-3)) * Omega^-1",
                quad_exact,
            ),
            Column::f64("quad_z", "(mc - exact)/se", quad_z),
        ],
    );

    // forecast-ratio block: per-trial Q = true/naive for the unit-naive
    // normalized optimized portfolio
    let q_ratios: Vec<f64> = ratios.iter().map(|&(q1, q2)| q2 / q1).collect();
    let (mean_q, se_q) = mean_se(&q_ratios);
    let simplified = asset_correction_factor(n, t as f64)?.variance_factor;
    let exact = exact_asset_correction(n, t as f64)?.variance_factor;

    let ratio_table = ResultTable::new(
        "forecast_ratios",
        vec![
            Column::u64("trial", "trial index", (0..trials as u64).collect()),
            Column::f64(
                "naive_variance",
                "w'Ω̂w for the unnormalized optimized portfolio",
                ratios.iter().map(|&(q1, _)| q1).collect(),
            ),
            Column::f64(
                "true_variance",
                "w'Ωw for the same portfolio",
                ratios.iter().map(|&(_, q2)| q2).collect(),
            ),
            Column::f64(
                "true_over_naive",
                "per-trial variance ratio (unit-naive normalization)",
                q_ratios,
            ),
        ],
    );

    let summary = vec![
        SummaryItem::plain("c1_exact", c1),
        SummaryItem::plain("c2_exact", c2),
        SummaryItem::plain("max_abs_z_inverse", max_z_inv),
        SummaryItem::plain("max_abs_z_quadratic", max_z_quad),
        SummaryItem::plain("max_rel_dev_inverse", max_rel_inv),
        SummaryItem::plain("max_rel_dev_quadratic", max_rel_quad),
        SummaryItem::with_se("mean_true_over_naive", mean_q, se_q),
        SummaryItem::plain("simplified_variance_factor", simplified),
        SummaryItem::plain("exact_variance_factor", exact),
        SummaryItem::with_se("naive_over_true", 1.0 / mean_q, se_q / (mean_q * mean_q)),
        SummaryItem::with_se(
            "corrected_over_true",
            simplified / mean_q,
            simplified * se_q / (mean_q * mean_q),
        ),
        SummaryItem::with_se(
            "corrected_exact_over_true",
            exact / mean_q,
            exact * se_q / (mean_q * mean_q),
        ),
    ];

    Ok(ExperimentResult {
        experiment: "wishart".into(),
        master_seed: config.master_seed,
        config_canonical: config.to_canonical_string(),
        tables: vec![identity_table, ratio_table],
        summary,
    })
}
