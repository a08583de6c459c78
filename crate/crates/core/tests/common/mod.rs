//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tgc::{CorrelationModel, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_dense(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_dense(d: &DMatrix<f64>) -> Matrix<f64> {
    Matrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)])
}

/// Random correlation matrix from `A A^T + 0.1 I`, rescaled.
pub fn random_correlation(rng: &mut ChaCha8Rng, n: usize) -> CorrelationModel<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
    let d: Vec<f64> = (0..n).map(|i| s[(i, i)].sqrt()).collect();
    let c = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { s[(i, j)] / (d[i] * d[j]) });
    CorrelationModel::from_matrix(from_dense(&c)).expect("valid correlation")
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Random disjoint observed/missing split with at least one of each.
pub fn random_split(rng: &mut ChaCha8Rng, n: usize) -> (Vec<usize>, Vec<usize>) {
    loop {
        let flags: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let obs: Vec<usize> = (0..n).filter(|&j| flags[j]).collect();
        let mis: Vec<usize> = (0..n).filter(|&j| !flags[j]).collect();
        if !obs.is_empty() && !mis.is_empty() {
            return (obs, mis);
        }
    }
}

fn sub(s: &DMatrix<f64>, r: &[usize], c: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), c.len(), |i, j| s[(r[i], c[j])])
}

/// Conditional mean and covariance through an explicit inverse of `Σ_oo`.
pub fn dense_conditional(
    sigma: &Matrix<f64>,
    obs: &[usize],
    mis: &[usize],
    z_o: &[f64],
) -> (Vec<f64>, DMatrix<f64>) {
    let s = to_dense(sigma);
    let inv = sub(&s, obs, obs).try_inverse().expect("invertible");
    let s_mo = sub(&s, mis, obs);
    let mean = &s_mo * &inv * DVector::from_column_slice(z_o);
    let cov = sub(&s, mis, mis) - &s_mo * &inv * sub(&s, obs, mis);
    (mean.iter().copied().collect(), cov)
}

/// `log N(z; 0, Σ)` through an explicit inverse and an LU determinant.
pub fn dense_log_density(sigma: &DMatrix<f64>, z: &[f64]) -> f64 {
    let n = z.len() as f64;
    let v = DVector::from_column_slice(z);
    let inv = sigma.clone().try_inverse().expect("invertible");
    let quad = (v.transpose() * inv * &v)[(0, 0)];
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + sigma.determinant().ln() + quad)
}

pub fn dense_sub(sigma: &Matrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    sub(&to_dense(sigma), idx, idx)
}

/// `erf(x)` from the all-positive series
/// `erf(x) = 2/√π e^{-x²} Σ 2^n x^{2n+1} / (1·3·…·(2n+1))`.
pub fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    let mut n = 0.0;
    while term.abs() > 1e-18 * sum.abs() {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 / std::f64::consts::PI.sqrt() * (-x2).exp() * sum
}

/// `erfc(x)` for `x > 0` from the Laplace continued fraction, evaluated with
/// the modified Lentz method.
pub fn erfc_cf(x: f64) -> f64 {
    // erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + 2/(x + ...)))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..5000 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}

/// Reference `Φ(x)`.
pub fn phi_oracle(x: f64) -> f64 {
    let y = x.abs() / std::f64::consts::SQRT_2;
    let upper = if y < 2.5 { 1.0 - erf_series(y) } else { erfc_cf(y) };
    if x < 0.0 {
        0.5 * upper
    } else {
        1.0 - 0.5 * upper
    }
}
