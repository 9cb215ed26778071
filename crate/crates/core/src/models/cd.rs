use nalgebra::{DMatrix, DVector};

use super::{center, check_inputs, Diagnostics, Fit, ModelError};

/// Correlations within this relative distance of the L1 threshold are treated
/// as on it, so a coordinate at exactly `λ_max` stays zero despite rounding in
/// the residual dot product.
const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CdOptions {
    /// Stop once no coefficient moves by more than this in a full sweep.
    pub tol: f64,
    pub max_iter: usize,
    pub fit_intercept: bool,
    pub warm_start: Option<DVector<f64>>,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            tol: super::DEFAULT_TOL,
            max_iter: super::DEFAULT_MAX_ITER,
            fit_intercept: true,
            warm_start: None,
        }
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn penalised(resid: &DVector<f64>, beta: &DVector<f64>, l1: f64, l2: f64) -> f64 {
    let n = resid.len() as f64;
    resid.norm_squared() / (2.0 * n)
        + l1 * beta.iter().map(|b| b.abs()).sum::<f64>()
        + l2 / 2.0 * beta.norm_squared()
}

/// Lasso: elastic net with `mix = 1`.
pub fn fit_lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, opts: &CdOptions) -> Result<Fit, ModelError> {
    fit_elastic_net(x, y, lambda, 1.0, opts)
}

/// Cyclic coordinate descent for
/// `(1/2n)·RSS + λ·(mix·‖β‖₁ + (1−mix)/2·‖β‖₂²)`.
pub fn fit_elastic_net(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    mix: f64,
    opts: &CdOptions,
) -> Result<Fit, ModelError> {
    check_inputs(x, y, 1)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(ModelError::InvalidSpec(format!("lambda {lambda} must be finite and >= 0")));
    }
    if !(0.0..=1.0).contains(&mix) {
        return Err(ModelError::InvalidSpec(format!("mix {mix} outside [0, 1]")));
    }
    if !(opts.tol > 0.0) {
        return Err(ModelError::InvalidSpec(format!("tol {} must be positive", opts.tol)));
    }
    let p = x.ncols();
    let n = x.nrows() as f64;
    let c = center(x, y, opts.fit_intercept);
    let l1 = lambda * mix;
    let l2 = lambda * (1.0 - mix);

    let mut beta = match &opts.warm_start {
        Some(w) if w.len() == p && w.iter().all(|v| v.is_finite()) => w.clone(),
        Some(w) => {
            return Err(ModelError::InvalidSpec(format!(
                "warm start has {} entries for {p} columns",
                w.len()
            )))
        }
        None => DVector::zeros(p),
    };
    let col_sq: Vec<f64> = c.x.column_iter().map(|col| col.norm_squared() / n).collect();
    for j in 0..p {
        if col_sq[j] == 0.0 {
            beta[j] = 0.0;
        }
    }
    let mut resid = &c.y - &c.x * &beta;
    let mut trace = vec![penalised(&resid, &beta, l1, l2)];
    let mut converged = p == 0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = c.x.column(j);
            let old = beta[j];
            let rho = col.dot(&resid) / n + col_sq[j] * old;
            let new = if rho.abs() <= l1 * (1.0 + THRESHOLD_SLACK) {
                0.0
            } else {
                soft_threshold(rho, l1) / (col_sq[j] + l2)
            };
            let delta = new - old;
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        trace.push(penalised(&resid, &beta, l1, l2));
        if !max_delta.is_finite() {
            return Err(ModelError::Numeric("coordinate descent diverged".into()));
        }
        converged = max_delta < opts.tol;
    }
    if !converged {
        log::warn!(
            "coordinate descent stopped after {iterations} sweeps without reaching tol {}",
            opts.tol
        );
    }

    let intercept = if opts.fit_intercept {
        c.y_mean - c.x_mean.dot(&beta)
    } else {
        0.0
    };
    Ok(Fit {
        intercept,
        diagnostics: Diagnostics {
            objective: *trace.last().expect("trace has the starting point"),
            iterations,
            converged,
            rank: None,
            rank_deficient: false,
            condition_number: None,
        },
        coefficients: beta,
        objective_trace: trace,
    })
}
