//! Linear model families fitted on lagged design matrices.
//!
//! Objectives, with `n` rows and the intercept never penalised:
//!
//! ```text
//! OLS    RSS
//! RIDGE  (1/2n)·RSS + (λ/2)·‖β‖₂²
//! LASSO  (1/2n)·RSS + λ·‖β‖₁
//! ENET   (1/2n)·RSS + λ·(mix·‖β‖₁ + (1−mix)/2·‖β‖₂²)
//! ```
//!
//! OLS and ridge are solved through a singular value decomposition of the
//! centred design; lasso and elastic net use cyclic coordinate descent.

mod cd;
mod grid;
mod linear;

pub use cd::{fit_elastic_net, fit_lasso, soft_threshold, CdOptions};
pub use grid::{grid_search, GridPoint, GridSearchResult, HyperGrid};
pub use linear::{condition_number, fit_ols, fit_ridge, Conditioning};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{DesignMatrix, PanelError, Scaler};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{rows} rows, need at least {needed}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("design has {x_rows} rows but target has {y_len}")]
    ShapeMismatch { x_rows: usize, y_len: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("design matrix lacks model feature {0:?}")]
    MissingFeature(String),
    #[error("design matrix has feature {0:?} unknown to the model")]
    UnexpectedFeature(String),
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("validation tail is empty ({rows} training rows, fraction {fraction})")]
    EmptyValidation { rows: usize, fraction: f64 },
    #[error("empty matrix")]
    EmptyInput,
    #[error(transparent)]
    Scaling(#[from] PanelError),
}

impl ModelError {
    /// Failures of the numerics themselves rather than of the input data.
    pub fn is_numeric(&self) -> bool {
        matches!(self, ModelError::NonFinite(_) | ModelError::Numeric(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    Ridge,
    Lasso,
    Enet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Ols, ModelKind::Ridge, ModelKind::Lasso, ModelKind::Enet];

    pub fn code(&self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::Enet => "enet",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Ols => "Linear Regression",
            ModelKind::Ridge => "Ridge Regression",
            ModelKind::Lasso => "Lasso Regression",
            ModelKind::Enet => "Elastic Net Regression",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ols" | "linear" => Ok(ModelKind::Ols),
            "ridge" => Ok(ModelKind::Ridge),
            "lasso" => Ok(ModelKind::Lasso),
            "enet" | "elasticnet" | "elastic_net" => Ok(ModelKind::Enet),
            other => Err(ModelError::InvalidSpec(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub lambda: f64,
    /// Elastic-net L1 share; only meaningful for [`ModelKind::Enet`].
    pub mix: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub fit_intercept: bool,
}

impl ModelSpec {
    fn base(kind: ModelKind, lambda: f64, mix: Option<f64>) -> Self {
        ModelSpec {
            kind,
            lambda,
            mix,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            fit_intercept: true,
        }
    }

    pub fn ols() -> Self {
        Self::base(ModelKind::Ols, 0.0, None)
    }

    pub fn ridge(lambda: f64) -> Self {
        Self::base(ModelKind::Ridge, lambda, None)
    }

    pub fn lasso(lambda: f64) -> Self {
        Self::base(ModelKind::Lasso, lambda, None)
    }

    pub fn enet(lambda: f64, mix: f64) -> Self {
        Self::base(ModelKind::Enet, lambda, Some(mix))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ModelError::InvalidSpec(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        match (self.kind, self.mix) {
            (ModelKind::Enet, Some(m)) if (0.0..=1.0).contains(&m) => {}
            (ModelKind::Enet, m) => {
                return Err(ModelError::InvalidSpec(format!("elastic net needs mix in [0, 1], got {m:?}")))
            }
            (_, Some(_)) => return Err(ModelError::InvalidSpec("mix is only defined for enet".into())),
            (_, None) => {}
        }
        if !(self.tol > 0.0) {
            return Err(ModelError::InvalidSpec(format!("tol {} must be positive", self.tol)));
        }
        Ok(())
    }

    fn cd_options(&self) -> CdOptions {
        CdOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            fit_intercept: self.fit_intercept,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Value of the model's own objective at the solution.
    pub objective: f64,
    /// Coordinate-descent sweeps (0 for closed-form fits).
    pub iterations: usize,
    pub converged: bool,
    pub rank: Option<usize>,
    pub rank_deficient: bool,
    /// Of the training feature matrix; `inf` when ill-conditioned.
    pub condition_number: Option<f64>,
}

/// Raw solver output on unnamed columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub intercept: f64,
    pub coefficients: DVector<f64>,
    pub diagnostics: Diagnostics,
    /// Objective after every coordinate-descent sweep, starting point first.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub intercept: f64,
    pub features: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Present when the model was trained on scaled data; predictions are
    /// mapped back through it.
    pub scaler: Option<Scaler>,
    pub diagnostics: Diagnostics,
}

impl FittedModel {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.features
            .iter()
            .position(|f| f == name)
            .map(|i| self.coefficients[i])
    }

    pub fn named_coefficients(&self) -> impl Iterator<Item = (&str, f64)> {
        self.features
            .iter()
            .map(String::as_str)
            .zip(self.coefficients.iter().copied())
    }
}

pub(crate) fn check_inputs(x: &DMatrix<f64>, y: &DVector<f64>, min_rows: usize) -> Result<(), ModelError> {
    if x.nrows() != y.len() {
        return Err(ModelError::ShapeMismatch {
            x_rows: x.nrows(),
            y_len: y.len(),
        });
    }
    if x.nrows() < min_rows {
        return Err(ModelError::TooFewRows {
            rows: x.nrows(),
            needed: min_rows,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("target"));
    }
    Ok(())
}

/// Column-centred copy of the data (a no-op without an intercept).
pub(crate) struct Centered {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub x_mean: DVector<f64>,
    pub y_mean: f64,
}

pub(crate) fn center(x: &DMatrix<f64>, y: &DVector<f64>, fit_intercept: bool) -> Centered {
    if !fit_intercept {
        return Centered {
            x: x.clone(),
            y: y.clone(),
            x_mean: DVector::zeros(x.ncols()),
            y_mean: 0.0,
        };
    }
    let n = x.nrows() as f64;
    let x_mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let y_mean = y.sum() / n;
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let yc = y.add_scalar(-y_mean);
    Centered {
        x: xc,
        y: yc,
        x_mean,
        y_mean,
    }
}

/// Penalised objective of `spec.kind` at `(intercept, beta)`.
pub fn objective(
    spec: &ModelSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    intercept: f64,
    beta: &DVector<f64>,
) -> f64 {
    let resid = y - x * beta;
    let rss: f64 = resid.iter().map(|r| (r - intercept).powi(2)).sum();
    let n = x.nrows() as f64;
    let l1 = beta.iter().map(|b| b.abs()).sum::<f64>();
    let l2 = beta.norm_squared();
    match spec.kind {
        ModelKind::Ols => rss,
        ModelKind::Ridge => rss / (2.0 * n) + spec.lambda / 2.0 * l2,
        ModelKind::Lasso => rss / (2.0 * n) + spec.lambda * l1,
        ModelKind::Enet => {
            let mix = spec.mix.unwrap_or(1.0);
            rss / (2.0 * n) + spec.lambda * (mix * l1 + (1.0 - mix) / 2.0 * l2)
        }
    }
}

/// Dispatches to the solver for `spec.kind`.
pub fn fit_spec(
    spec: &ModelSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    warm_start: Option<&DVector<f64>>,
) -> Result<Fit, ModelError> {
    spec.validate()?;
    match spec.kind {
        ModelKind::Ols => fit_ols(x, y, spec.fit_intercept),
        ModelKind::Ridge => fit_ridge(x, y, spec.lambda, spec.fit_intercept),
        ModelKind::Lasso | ModelKind::Enet => {
            let mut opts = spec.cd_options();
            opts.warm_start = warm_start.cloned();
            let mix = spec.mix.unwrap_or(1.0);
            fit_elastic_net(x, y, spec.lambda, mix, &opts)
        }
    }
}

/// Fits `spec` on a named design matrix and records its conditioning.
pub fn fit_design(
    spec: &ModelSpec,
    design: &DesignMatrix,
    scaler: Option<&Scaler>,
) -> Result<FittedModel, ModelError> {
    let fit = fit_spec(spec, &design.x, &design.y, None)?;
    Ok(into_model(spec, design, scaler, fit))
}

pub(crate) fn into_model(
    spec: &ModelSpec,
    design: &DesignMatrix,
    scaler: Option<&Scaler>,
    fit: Fit,
) -> FittedModel {
    let mut diagnostics = fit.diagnostics;
    if diagnostics.condition_number.is_none() {
        diagnostics.condition_number = condition_number(&design.x).ok().map(|c| c.value);
    }
    FittedModel {
        spec: spec.clone(),
        intercept: fit.intercept,
        features: design.columns.iter().map(|c| c.name.clone()).collect(),
        coefficients: fit.coefficients.iter().copied().collect(),
        scaler: scaler.cloned(),
        diagnostics,
    }
}

/// `intercept + Xβ` in the units the model was trained in, with columns
/// matched by name.
pub fn predict_raw(model: &FittedModel, design: &DesignMatrix) -> Result<Vec<f64>, ModelError> {
    let index: HashMap<&str, usize> = design
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let mut cols = Vec::with_capacity(model.features.len());
    for f in &model.features {
        let i = index
            .get(f.as_str())
            .ok_or_else(|| ModelError::MissingFeature(f.clone()))?;
        cols.push(*i);
    }
    if design.columns.len() != model.features.len() {
        let known: std::collections::HashSet<&str> = model.features.iter().map(String::as_str).collect();
        let extra = design
            .columns
            .iter()
            .find(|c| !known.contains(c.name.as_str()))
            .map(|c| c.name.clone())
            .unwrap_or_default();
        return Err(ModelError::UnexpectedFeature(extra));
    }
    Ok((0..design.n_rows())
        .map(|r| {
            model.intercept
                + cols
                    .iter()
                    .zip(&model.coefficients)
                    .map(|(&c, b)| design.x[(r, c)] * b)
                    .sum::<f64>()
        })
        .collect())
}

/// Predictions in index units: raw predictions mapped back through the
/// model's target scaling when it has one.
pub fn predict(model: &FittedModel, design: &DesignMatrix) -> Result<Vec<f64>, ModelError> {
    let raw = predict_raw(model, design)?;
    match &model.scaler {
        Some(s) => raw
            .into_iter()
            .map(|v| s.unscale_target(v).map_err(ModelError::from))
            .collect(),
        None => Ok(raw),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{FeatureColumn, FeatureKind};
    use chrono::NaiveDate;

    pub(crate) fn design(names: &[&str], x: DMatrix<f64>, y: DVector<f64>) -> DesignMatrix {
        let n = x.nrows();
        DesignMatrix {
            dates: (0..n)
                .map(|i| NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Duration::days(i as i64))
                .collect(),
            columns: names
                .iter()
                .map(|n| FeatureColumn {
                    name: n.to_string(),
                    base: n.to_string(),
                    lag: 1,
                    kind: if crate::panel::is_price_feature(n) {
                        FeatureKind::Price
                    } else {
                        FeatureKind::Sentiment
                    },
                })
                .collect(),
            x,
            y,
            lag_depth: 1,
            trading_day: vec![true; n],
            scaled: false,
        }
    }

    fn noiseless() -> DesignMatrix {
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.5, 2.0, -1.0, 3.0, 2.0, 4.0, 0.0, 5.0, 1.5]);
        let y = DVector::from_fn(5, |r, _| 3.0 + 2.0 * x[(r, 0)] - 1.0 * x[(r, 1)]);
        design(&["a_lag1", "b_lag1"], x, y)
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::ridge(-1.0).validate().is_err());
        assert!(ModelSpec::enet(1.0, 1.5).validate().is_err());
        let mut s = ModelSpec::lasso(1.0);
        s.mix = Some(0.5);
        assert!(s.validate().is_err());
        assert!(ModelSpec::enet(0.0, 0.0).validate().is_ok());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("ENET".parse::<ModelKind>().unwrap(), ModelKind::Enet);
        assert_eq!("linear".parse::<ModelKind>().unwrap(), ModelKind::Ols);
        assert!("tree".parse::<ModelKind>().is_err());
    }

    #[test]
    fn zero_features_predict_intercept() {
        let d = noiseless();
        let m = fit_design(&ModelSpec::ols(), &d, None).unwrap();
        let mut zeros = d.clone();
        zeros.x.fill(0.0);
        for p in predict(&m, &zeros).unwrap() {
            assert!((p - m.intercept).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_features_inverse_scaled() {
        let d = noiseless();
        let scaler = Scaler::fit(&d).unwrap();
        let scaled = scaler.apply(&d).unwrap();
        let m = fit_design(&ModelSpec::ols(), &scaled, Some(&scaler)).unwrap();
        let mut zeros = scaled.clone();
        zeros.x.fill(0.0);
        let expected = scaler.unscale_target(m.intercept).unwrap();
        assert!((predict(&m, &zeros).unwrap()[0] - expected).abs() < 1e-12);
        // training rows of a noiseless fit come back exactly in original units
        for (p, y) in predict(&m, &scaled).unwrap().iter().zip(d.y.iter()) {
            assert!((p - y).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_training_rows_exact() {
        let d = noiseless();
        let m = fit_design(&ModelSpec::ols(), &d, None).unwrap();
        for (p, y) in predict(&m, &d).unwrap().iter().zip(d.y.iter()) {
            assert!((p - y).abs() < 1e-10);
        }
    }

    #[test]
    fn column_order_does_not_matter() {
        let d = noiseless();
        let m = fit_design(&ModelSpec::ridge(0.1), &d, None).unwrap();
        let mut swapped = d.clone();
        swapped.columns.swap(0, 1);
        swapped.x.swap_columns(0, 1);
        assert_eq!(predict(&m, &d).unwrap(), predict(&m, &swapped).unwrap());
    }

    #[test]
    fn column_mismatch_named() {
        let d = noiseless();
        let m = fit_design(&ModelSpec::ols(), &d, None).unwrap();
        let mut renamed = d.clone();
        renamed.columns[1].name = "c_lag1".into();
        match predict(&m, &renamed) {
            Err(ModelError::MissingFeature(name)) => assert_eq!(name, "b_lag1"),
            other => panic!("unexpected {other:?}"),
        }
        let mut extra = d.clone();
        extra.columns.push(FeatureColumn {
            name: "z_lag1".into(),
            base: "z".into(),
            lag: 1,
            kind: FeatureKind::Sentiment,
        });
        extra.x = extra.x.insert_column(2, 0.0);
        match predict(&m, &extra) {
            Err(ModelError::UnexpectedFeature(name)) => assert_eq!(name, "z_lag1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn named_coefficients_and_condition_number() {
        let m = fit_design(&ModelSpec::ols(), &noiseless(), None).unwrap();
        assert!((m.coefficient("a_lag1").unwrap() - 2.0).abs() < 1e-10);
        assert!((m.coefficient("b_lag1").unwrap() + 1.0).abs() < 1e-10);
        assert!(m.diagnostics.condition_number.unwrap() > 1.0);
        assert_eq!(m.named_coefficients().count(), 2);
    }
}
