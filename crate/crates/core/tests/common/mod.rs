#![allow(dead_code)]

use bayeskern::numerics::SeededRng;
use nalgebra::{DMatrix, DVector};

pub fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
    xs.iter().map(|&x| vec![x]).collect()
}

pub fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

/// Sorted grid on `[lo, hi]` with each node moved by up to a quarter spacing.
pub fn jittered_grid(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| lo + step * (i as f64 + 0.25 * (2.0 * rng.uniform() - 1.0)))
        .collect()
}

pub fn normals(rng: &mut SeededRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.standard_normal()).collect()
}

/// Sample mean and (1/S) covariance of the rows.
pub fn moments(draws: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let s = draws.nrows() as f64;
    let mean = draws.row_mean().transpose();
    let mut cov = DMatrix::zeros(draws.ncols(), draws.ncols());
    for row in draws.row_iter() {
        let d = row.transpose() - &mean;
        cov += &d * d.transpose();
    }
    (mean, cov / s)
}

/// Standard error of the covariance estimator for Gaussian data.
pub fn cov_se(c: &DMatrix<f64>, i: usize, j: usize, s: usize) -> f64 {
    ((c[(i, i)] * c[(j, j)] + c[(i, j)] * c[(i, j)]) / s as f64).sqrt()
}

/// Fraction of entries inside `z` standard errors (means and covariances).
pub fn moment_pass_rate(draws: &DMatrix<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>, z_mean: f64, z_cov: f64) -> f64 {
    let s = draws.nrows();
    let (m, c) = moments(draws);
    let p = mean.len();
    let mut pass = 0;
    let mut total = 0;
    for i in 0..p {
        total += 1;
        if (m[i] - mean[i]).abs() <= z_mean * (cov[(i, i)] / s as f64).sqrt() + 1e-12 {
            pass += 1;
        }
        for j in 0..p {
            total += 1;
            if (c[(i, j)] - cov[(i, j)]).abs() <= z_cov * cov_se(cov, i, j, s) + 1e-12 {
                pass += 1;
            }
        }
    }
    pass as f64 / total as f64
}
