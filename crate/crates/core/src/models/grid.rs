use std::cmp::Ordering;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{fit_spec, into_model, predict_raw, FittedModel, ModelError, ModelKind, ModelSpec};
use crate::panel::{DesignMatrix, Scaler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperGrid {
    pub lambdas: Vec<f64>,
    /// Elastic-net L1 shares; ignored by the other families.
    pub mixes: Vec<f64>,
    /// Chronological tail of the training rows held out for selection.
    pub validation_fraction: f64,
}

impl Default for HyperGrid {
    /// Thirteen half-decade steps from 1e-4 to 1e2.
    fn default() -> Self {
        HyperGrid {
            lambdas: (0..13).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64)).collect(),
            mixes: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            validation_fraction: 0.2,
        }
    }
}

impl HyperGrid {
    pub fn validate(&self, kind: ModelKind) -> Result<(), ModelError> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(ModelError::InvalidSpec(format!(
                "validation fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        if kind != ModelKind::Ols && self.lambdas.is_empty() {
            return Err(ModelError::EmptyGrid);
        }
        if kind == ModelKind::Enet && self.mixes.is_empty() {
            return Err(ModelError::EmptyGrid);
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(ModelError::InvalidSpec(format!("grid lambda {l} must be finite and >= 0")));
        }
        if let Some(m) = self.mixes.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(ModelError::InvalidSpec(format!("grid mix {m} outside [0, 1]")));
        }
        Ok(())
    }

    /// `(n_fit, n_validation)` for `rows` training rows.
    pub fn partition(&self, rows: usize) -> Result<(usize, usize), ModelError> {
        let n_val = (rows as f64 * self.validation_fraction).floor() as usize;
        if n_val == 0 || rows - n_val < 2 {
            return Err(ModelError::EmptyValidation {
                rows,
                fraction: self.validation_fraction,
            });
        }
        Ok((rows - n_val, n_val))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub mix: Option<f64>,
    pub validation_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// Winning hyperparameters refitted on every training row.
    pub best: FittedModel,
    pub points: Vec<GridPoint>,
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let sse: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (sse / a.len() as f64).sqrt()
}

fn by_rmse_then_params(a: &GridPoint, b: &GridPoint) -> Ordering {
    let key = |p: &GridPoint| if p.validation_rmse.is_nan() { f64::INFINITY } else { p.validation_rmse };
    key(a)
        .total_cmp(&key(b))
        .then(a.lambda.total_cmp(&b.lambda))
        .then(a.mix.unwrap_or(0.0).total_cmp(&b.mix.unwrap_or(0.0)))
}

/// Picks hyperparameters by validation RMSE on the chronological tail of
/// `train` (in the units of `train.y`), then refits the winner on all of it.
///
/// `base` supplies the family, tolerance and iteration cap. Ties go to the
/// smaller λ, then the smaller mix.
pub fn grid_search(
    base: &ModelSpec,
    grid: &HyperGrid,
    train: &DesignMatrix,
    scaler: Option<&Scaler>,
) -> Result<GridSearchResult, ModelError> {
    grid.validate(base.kind)?;
    let (n_fit, n_val) = grid.partition(train.n_rows())?;
    let head = train.select_rows(&(0..n_fit).collect::<Vec<_>>());
    let tail = train.select_rows(&(n_fit..n_fit + n_val).collect::<Vec<_>>());
    let tail_y: Vec<f64> = tail.y.iter().copied().collect();

    let mut candidates: Vec<ModelSpec> = Vec::new();
    let mut lambdas = grid.lambdas.clone();
    // descending so coordinate descent can warm-start along the path
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas.dedup();
    match base.kind {
        ModelKind::Ols => candidates.push(ModelSpec { lambda: 0.0, mix: None, ..base.clone() }),
        ModelKind::Ridge | ModelKind::Lasso => {
            for &l in &lambdas {
                candidates.push(ModelSpec { lambda: l, mix: None, ..base.clone() });
            }
        }
        ModelKind::Enet => {
            for &m in &grid.mixes {
                for &l in &lambdas {
                    candidates.push(ModelSpec { lambda: l, mix: Some(m), ..base.clone() });
                }
            }
        }
    }

    let mut points = Vec::with_capacity(candidates.len());
    let mut warm: Option<(Option<f64>, DVector<f64>)> = None;
    for spec in &candidates {
        let start = match (&warm, spec.kind) {
            (Some((mix, beta)), ModelKind::Lasso | ModelKind::Enet) if *mix == spec.mix => Some(beta),
            _ => None,
        };
        let fit = fit_spec(spec, &head.x, &head.y, start)?;
        warm = Some((spec.mix, fit.coefficients.clone()));
        let model = into_model(spec, &head, None, fit);
        let pred = predict_raw(&model, &tail)?;
        let point = GridPoint {
            lambda: spec.lambda,
            mix: spec.mix,
            validation_rmse: rmse(&tail_y, &pred),
        };
        log::debug!("{} λ={} mix={:?}: rmse {}", spec.kind, point.lambda, point.mix, point.validation_rmse);
        points.push(point);
    }

    let winner = points
        .iter()
        .min_by(|a, b| by_rmse_then_params(a, b))
        .ok_or(ModelError::EmptyGrid)?
        .clone();
    let spec = ModelSpec {
        lambda: winner.lambda,
        mix: winner.mix,
        ..base.clone()
    };
    let fit = fit_spec(&spec, &train.x, &train.y, None)?;
    Ok(GridSearchResult {
        best: into_model(&spec, train, scaler, fit),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tests::design;
    use nalgebra::DMatrix;

    fn data() -> DesignMatrix {
        let x = DMatrix::from_fn(40, 3, |r, c| (((r + 1) * (c + 3) * 7 % 23) as f64 - 11.0) / 5.0);
        let y = DVector::from_fn(40, |r, _| {
            1.0 + 0.8 * x[(r, 0)] - 0.3 * x[(r, 2)] + ((r * 5 % 7) as f64 - 3.0) * 0.05
        });
        design(&["a_lag1", "b_lag1", "close_lag1"], x, y)
    }

    #[test]
    fn default_lambdas() {
        let g = HyperGrid::default();
        assert_eq!(g.lambdas.len(), 13);
        assert!((g.lambdas[0] - 1e-4).abs() < 1e-18);
        assert!((g.lambdas[12] - 1e2).abs() < 1e-9);
    }

    #[test]
    fn partition_rules() {
        let g = HyperGrid::default();
        assert_eq!(g.partition(10).unwrap(), (8, 2));
        assert!(g.partition(4).is_err());
    }

    #[test]
    fn ols_has_one_point() {
        let r = grid_search(&ModelSpec::ols(), &HyperGrid::default(), &data(), None).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.best.spec.lambda, 0.0);
    }

    #[test]
    fn enet_covers_product() {
        let r = grid_search(&ModelSpec::enet(0.0, 0.5), &HyperGrid::default(), &data(), None).unwrap();
        assert_eq!(r.points.len(), 65);
        let best = r
            .points
            .iter()
            .map(|p| p.validation_rmse)
            .fold(f64::INFINITY, f64::min);
        let chosen = r
            .points
            .iter()
            .find(|p| p.lambda == r.best.spec.lambda && p.mix == r.best.spec.mix)
            .unwrap();
        assert_eq!(chosen.validation_rmse, best);
    }

    #[test]
    fn ties_prefer_smaller_lambda() {
        // A constant target makes every λ equally good.
        let mut d = data();
        d.y.fill(2.0);
        let grid = HyperGrid {
            lambdas: vec![1.0, 0.1, 10.0],
            ..HyperGrid::default()
        };
        let r = grid_search(&ModelSpec::lasso(0.0), &grid, &d, None).unwrap();
        assert_eq!(r.best.spec.lambda, 0.1);
    }

    #[test]
    fn empty_grid_rejected() {
        let grid = HyperGrid {
            lambdas: vec![],
            ..HyperGrid::default()
        };
        assert!(matches!(
            grid_search(&ModelSpec::ridge(0.0), &grid, &data(), None),
            Err(ModelError::EmptyGrid)
        ));
    }
}
