//! Random-matrix and panel samplers used by the Monte Carlo experiments.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Matrix with i.i.d. standard-normal entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(nrows: usize, ncols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(nrows, ncols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Vector with i.i.d. standard-normal entries.
pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-ish random orthogonal matrix: QR of a Gaussian matrix with the R
/// diagonal sign fixed.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian_matrix(n, n, rng).qr();
    let r = qr.r();
    let signs: Vec<f64> = (0..n).map(|i| if r[(i, i)] < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut q = qr.q();
    for j in 0..n {
        if signs[j] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Random SPD matrix `Q Λ Q'` with a random orthogonal `Q` and eigenvalues
/// drawn log-uniformly from `[eig_min, eig_max]`.
pub fn random_spd<R: Rng + ?Sized>(
    n: usize,
    eig_min: f64,
    eig_max: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    assert!(eig_min > 0.0 && eig_max >= eig_min);
    let q = random_orthogonal(n, rng);
    let lo = eig_min.ln();
    let hi = eig_max.ln();
    let lambda = DVector::from_fn(n, |_, _| (lo + (hi - lo) * rng.gen::<f64>()).exp());
    let mut scaled = q.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= lambda[j];
        }
    }
    let mut m = scaled * q.transpose();
    // exact symmetry after round-off
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Sample covariance draw `Ω̂ ~ Wishart_N(Ω, t) / t` via the Bartlett
/// decomposition: `Ω̂ = L A A' L' / t` with `L = chol(Ω)`, `A` lower
/// triangular, `A_ii² ~ χ²(t-i)` and subdiagonal standard normals.
///
/// Equivalent in distribution to the divisor-`t` sample covariance of `t`
/// zero-mean Gaussian observations, without simulating the panel.
pub fn wishart_sample<R: Rng + ?Sized>(
    omega_chol: &Cholesky<f64, Dyn>,
    t: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let n = omega_chol.l_dirty().nrows();
    assert!(t >= n, "Wishart sample needs t >= n for a.s. full rank");
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let chi = ChiSquared::new((t - i) as f64).expect("positive dof");
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let la = omega_chol.l() * a;
    let mut m = &la * la.transpose();
    m /= t as f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `N x T` panel of zero-mean Gaussian returns with covariance `Ω = L L'`.
pub fn gaussian_panel<R: Rng + ?Sized>(
    omega_chol: &Cholesky<f64, Dyn>,
    t: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let n = omega_chol.l_dirty().nrows();
    omega_chol.l() * gaussian_matrix(n, t, rng)
}

/// `N x T` panel of zero-mean multivariate-t returns with a common mixing
/// variable per period, scaled so the covariance is `Ω` and the per-asset
/// kurtosis is `k > 3` (`ν = 4 + 6/(k-3)` degrees of freedom).
pub fn student_panel<R: Rng + ?Sized>(
    omega_chol: &Cholesky<f64, Dyn>,
    t: usize,
    kurtosis: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    assert!(kurtosis > 3.0, "student panel needs kurtosis > 3");
    let nu = 4.0 + 6.0 / (kurtosis - 3.0);
    let n = omega_chol.l_dirty().nrows();
    let gauss = omega_chol.l() * gaussian_matrix(n, t, rng);
    let chi = ChiSquared::new(nu).expect("positive dof");
    let mut out = gauss;
    for s in 0..t {
        // scale so Var = Ω exactly: t_ν variance is ν/(ν-2)
        let mix = ((nu - 2.0) / chi.sample(rng)).sqrt();
        for i in 0..n {
            out[(i, s)] *= mix;
        }
    }
    out
}
