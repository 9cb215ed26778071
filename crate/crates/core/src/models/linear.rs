use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use super::{center, check_inputs, objective, Diagnostics, Fit, ModelError, ModelSpec};

/// Below this ratio to the largest singular value the smallest one is
/// treated as zero when reporting conditioning.
const ILL_CONDITIONED_RATIO: f64 = 1e-15;

fn svd(x: &DMatrix<f64>, vectors: bool) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, ModelError> {
    // nalgebra's own default; a tighter bound lets a zero singular value stall
    // the iteration and leaves ~1e-7 error in the factors
    SVD::try_new(x.clone(), vectors, vectors, 5.0 * f64::EPSILON, 0)
        .ok_or_else(|| ModelError::Numeric("singular value decomposition did not converge".into()))
}

/// Solves `(XᵀX + nλI) β = Xᵀy` through the SVD of `x`. With `λ = 0` this
/// is the minimum-norm least-squares solution.
fn svd_solve(x: &DMatrix<f64>, y: &DVector<f64>, n_lambda: f64) -> Result<(DVector<f64>, usize), ModelError> {
    let p = x.ncols();
    if p == 0 {
        return Ok((DVector::zeros(0), 0));
    }
    let dec = svd(x, true)?;
    let u = dec.u.as_ref().expect("u requested");
    let v_t = dec.v_t.as_ref().expect("v_t requested");
    let s = &dec.singular_values;
    let s_max = s.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = x.nrows().max(p) as f64 * f64::EPSILON * s_max;
    let rank = s.iter().filter(|&&v| v > cutoff).count();

    let uty = u.transpose() * y;
    let w = DVector::from_fn(s.len(), |i, _| {
        let si = s[i];
        if n_lambda > 0.0 {
            si / (si * si + n_lambda) * uty[i]
        } else if si > cutoff {
            uty[i] / si
        } else {
            0.0
        }
    });
    Ok((v_t.transpose() * w, rank))
}

fn solve_closed_form(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    spec: ModelSpec,
) -> Result<Fit, ModelError> {
    let c = center(x, y, spec.fit_intercept);
    let n = x.nrows() as f64;
    let (beta, rank) = svd_solve(&c.x, &c.y, n * lambda)?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(ModelError::NonFinite("solution"));
    }
    let intercept = if spec.fit_intercept {
        c.y_mean - c.x_mean.dot(&beta)
    } else {
        0.0
    };
    let rank_deficient = rank < x.ncols();
    if rank_deficient && lambda == 0.0 {
        log::warn!(
            "design is rank deficient (rank {rank} < {} columns); returning the minimum-norm solution",
            x.ncols()
        );
    }
    let obj = objective(&spec, x, y, intercept, &beta);
    Ok(Fit {
        intercept,
        coefficients: beta,
        diagnostics: Diagnostics {
            objective: obj,
            iterations: 0,
            converged: true,
            rank: Some(rank),
            rank_deficient,
            condition_number: None,
        },
        objective_trace: Vec::new(),
    })
}

/// Ordinary least squares. Rank-deficient designs get the minimum-norm
/// solution and a warning.
pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>, fit_intercept: bool) -> Result<Fit, ModelError> {
    check_inputs(x, y, 2)?;
    let mut spec = ModelSpec::ols();
    spec.fit_intercept = fit_intercept;
    solve_closed_form(x, y, 0.0, spec)
}

/// Ridge regression: `(XᵀX/n + λI) β = Xᵀy/n` on centred data.
pub fn fit_ridge(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    fit_intercept: bool,
) -> Result<Fit, ModelError> {
    check_inputs(x, y, 1)?;
    let mut spec = ModelSpec::ridge(lambda);
    spec.fit_intercept = fit_intercept;
    spec.validate()?;
    solve_closed_form(x, y, lambda, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    /// Largest over smallest singular value; `inf` when ill-conditioned.
    pub value: f64,
    pub ill_conditioned: bool,
    pub largest: f64,
    pub smallest: f64,
}

pub fn condition_number(x: &DMatrix<f64>) -> Result<Conditioning, ModelError> {
    if x.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("design matrix"));
    }
    let dec = svd(x, false)?;
    let s = &dec.singular_values;
    let largest = s.iter().fold(0.0f64, |a, &b| a.max(b));
    // a wide matrix has rank at most nrows, so its smallest singular value is 0
    let smallest = if x.ncols() > x.nrows() {
        0.0
    } else {
        s.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    };
    let ill_conditioned = largest == 0.0 || smallest < ILL_CONDITIONED_RATIO * largest;
    Ok(Conditioning {
        value: if ill_conditioned { f64::INFINITY } else { largest / smallest },
        ill_conditioned,
        largest,
        smallest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovery() {
        let x = DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let y = x.column(0).map(|v| 2.0 * v + 3.0);
        let fit = fit_ols(&x, &y, true).unwrap();
        assert!((fit.intercept - 3.0).abs() < 1e-8);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-8);
        assert!(fit.diagnostics.objective < 1e-20);
        assert!(!fit.diagnostics.rank_deficient);
    }

    #[test]
    fn duplicated_column_splits_weight() {
        let col = [0.3, -1.2, 2.5, 0.7, 1.9, -0.4];
        let x = DMatrix::from_fn(6, 2, |r, _| col[r]);
        let y = DVector::from_fn(6, |r, _| 1.0 + 4.0 * col[r]);
        let fit = fit_ols(&x, &y, true).unwrap();
        assert!(fit.diagnostics.rank_deficient);
        assert_eq!(fit.diagnostics.rank, Some(1));
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-8);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-8);
        assert!((fit.intercept - 1.0).abs() < 1e-8);
    }

    #[test]
    fn too_few_rows_and_non_finite() {
        let x = DMatrix::from_element(1, 1, 1.0);
        let y = DVector::from_element(1, 1.0);
        assert!(matches!(fit_ols(&x, &y, true), Err(ModelError::TooFewRows { .. })));
        let x = DMatrix::from_column_slice(2, 1, &[1.0, f64::NAN]);
        let y = DVector::from_element(2, 1.0);
        assert!(matches!(fit_ols(&x, &y, true), Err(ModelError::NonFinite(_))));
        assert!(matches!(fit_ridge(&x, &y, 1.0, true), Err(ModelError::NonFinite(_))));
    }

    #[test]
    fn ridge_identity_example() {
        // (I/2 + 0.5 I) β = y/2  =>  β = y / 2 · 1 = (1, 2)
        let x = DMatrix::identity(2, 2);
        let y = DVector::from_column_slice(&[2.0, 4.0]);
        let fit = fit_ridge(&x, &y, 0.5, false).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert_eq!(fit.intercept, 0.0);
    }

    #[test]
    fn huge_ridge_penalty_kills_coefficients() {
        let x = DMatrix::from_fn(8, 3, |r, c| ((r * 7 + c * 3) % 5) as f64 - 2.0);
        let y = DVector::from_fn(8, |r, _| r as f64 * 1.5 + 4.0);
        let fit = fit_ridge(&x, &y, 1e9, true).unwrap();
        assert!(fit.coefficients.amax() < 1e-5);
        assert!((fit.intercept - y.mean()).abs() < 1e-4);
    }

    #[test]
    fn conditioning() {
        let c = condition_number(&DMatrix::identity(3, 3)).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12);
        let c = condition_number(&DMatrix::from_diagonal(&DVector::from_column_slice(&[10.0, 1.0]))).unwrap();
        assert!((c.value - 10.0).abs() < 1e-12);
        let col = [1.0, 2.0, 3.5, -1.0];
        let dup = DMatrix::from_fn(4, 2, |r, _| col[r]);
        let c = condition_number(&dup).unwrap();
        assert!(c.ill_conditioned);
        assert!(c.value.is_infinite());
        assert!(condition_number(&DMatrix::zeros(0, 0)).is_err());
    }
}
