//! Independent oracles shared by the integration tests. Everything here is
//! plain loops over `Vec<f64>`; none of it goes through the library's
//! solvers or nalgebra decompositions.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("signal")
}

pub fn random_instance<R: Rng>(rng: &mut R, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng));
    let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let y = DVector::from_fn(n, |r, _| {
        let signal: f64 = (0..p).map(|j| x[(r, j)] * beta[j]).sum();
        let noise: f64 = StandardNormal.sample(rng);
        1.5 + signal + 0.5 * noise
    });
    (x, y)
}

fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|r| (0..x.ncols()).map(|c| x[(r, c)]).collect()).collect()
}

/// Column means and centred copies.
pub fn centered(x: &DMatrix<f64>, y: &DVector<f64>) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64) {
    let n = x.nrows();
    let p = x.ncols();
    let xr = rows(x);
    let means: Vec<f64> = (0..p).map(|j| xr.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let ymean = y.iter().sum::<f64>() / n as f64;
    let xc = xr
        .iter()
        .map(|r| r.iter().zip(&means).map(|(v, m)| v - m).collect())
        .collect();
    let yc = y.iter().map(|v| v - ymean).collect();
    (xc, yc, means, ymean)
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut out = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * out[c]).sum();
        out[r] = (b[r] - s) / a[r][r];
    }
    out
}

/// Ridge via the normal equations `(XcᵀXc/n + λI) β = Xcᵀyc/n`.
pub fn ridge_oracle(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> (f64, Vec<f64>) {
    let (xc, yc, means, ymean) = centered(x, y);
    let n = xc.len() as f64;
    let p = x.ncols();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for (row, yv) in xc.iter().zip(&yc) {
        for i in 0..p {
            b[i] += row[i] * yv / n;
            for j in 0..p {
                a[i][j] += row[i] * row[j] / n;
            }
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += lambda;
    }
    let beta = solve(a, b);
    let intercept = ymean - means.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    (intercept, beta)
}

/// Elastic-net objective with the intercept profiled out.
pub fn enet_objective(xc: &[Vec<f64>], yc: &[f64], beta: &[f64], lambda: f64, mix: f64) -> f64 {
    let n = xc.len() as f64;
    let rss: f64 = xc
        .iter()
        .zip(yc)
        .map(|(r, yv)| {
            let fit: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum();
            (yv - fit).powi(2)
        })
        .sum();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    rss / (2.0 * n) + lambda * (mix * l1 + (1.0 - mix) / 2.0 * l2)
}

/// Minimises a convex function of two variables by exhaustive scans over
/// successively finer square grids, each centred on the previous best point.
pub fn scan_2d(f: impl Fn(f64, f64) -> f64, radius: f64) -> (f64, f64) {
    const STEPS: i32 = 80;
    let (mut cx, mut cy, mut r) = (0.0, 0.0, radius);
    while r > 1e-9 {
        let h = r / STEPS as f64;
        let mut best = (f64::INFINITY, cx, cy);
        for i in -STEPS..=STEPS {
            for j in -STEPS..=STEPS {
                let (a, b) = (cx + i as f64 * h, cy + j as f64 * h);
                let v = f(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        cx = best.1;
        cy = best.2;
        r = 10.0 * h;
    }
    (cx, cy)
}

/// Largest |gradient of the smooth part| violation of the lasso optimality
/// conditions at `beta`.
pub fn lasso_kkt_violation(x: &DMatrix<f64>, y: &DVector<f64>, intercept: f64, beta: &[f64], lambda: f64) -> f64 {
    let xr = rows(x);
    let n = xr.len() as f64;
    let resid: Vec<f64> = xr
        .iter()
        .zip(y.iter())
        .map(|(r, yv)| yv - intercept - r.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let mut worst = 0.0f64;
    for j in 0..beta.len() {
        let g: f64 = xr.iter().zip(&resid).map(|(r, e)| r[j] * e).sum::<f64>() / n;
        let v = if beta[j] == 0.0 {
            (g.abs() - lambda).max(0.0)
        } else {
            (g - lambda * beta[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// `‖Xcᵀ(y − ȳ)‖∞ / n`, the smallest λ at which the lasso is all zeros.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let (xc, yc, _, _) = centered(x, y);
    let n = xc.len() as f64;
    (0..x.ncols())
        .map(|j| (xc.iter().zip(&yc).map(|(r, v)| r[j] * v).sum::<f64>() / n).abs())
        .fold(0.0, f64::max)
}

pub fn rmse_plain(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len() as f64).sqrt()
}
