//! Evaluation metrics, coefficient rankings and report files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{predict, FittedModel, ModelError, ModelKind};
use crate::panel::{is_price_feature, DesignMatrix};

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("length mismatch: {predicted} predictions for {actual} actual values")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("rmse of empty vectors")]
    Empty,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("nothing to report")]
    NothingToReport,
    #[error("duplicate report for model {model} under config {config}")]
    Duplicate { model: ModelKind, config: String },
    #[error("unknown report format {0:?} (expected csv, json or markdown)")]
    UnknownFormat(String),
    #[error("test matrix is scaled but the model carries no scaler")]
    MissingScaler,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed comparison file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64, ReportError> {
    if predicted.len() != actual.len() {
        return Err(ReportError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(ReportError::Empty);
    }
    if predicted.iter().any(|v| !v.is_finite()) {
        return Err(ReportError::NonFinite("predictions"));
    }
    if actual.iter().any(|v| !v.is_finite()) {
        return Err(ReportError::NonFinite("actual values"));
    }
    let sse: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok((sse / predicted.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCoefficient {
    pub feature: String,
    pub coefficient: f64,
}

/// Sentiment coefficients ranked most positive first (or by magnitude with
/// `by_abs`), name order breaking ties. Price lags are never included.
pub fn top_k_sentiment_coeffs(model: &FittedModel, k: usize, by_abs: bool) -> Vec<RankedCoefficient> {
    let mut ranked: Vec<RankedCoefficient> = model
        .named_coefficients()
        .filter(|(name, _)| !is_price_feature(name))
        .map(|(name, c)| RankedCoefficient {
            feature: name.to_string(),
            coefficient: c,
        })
        .collect();
    let key = |c: &RankedCoefficient| if by_abs { c.coefficient.abs() } else { c.coefficient };
    ranked.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.feature.cmp(&b.feature)));
    ranked.truncate(k);
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub date: NaiveDate,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub config: String,
    pub rmse_index_units: f64,
    pub lambda: f64,
    pub mix: Option<f64>,
    pub predictions: Vec<PredictionRow>,
    pub intercept: f64,
    pub coefficients: Vec<RankedCoefficient>,
    pub top_sentiment: Vec<RankedCoefficient>,
}

/// Scores `model` on `test`. When `test` is scaled its target is mapped back
/// through the model's scaler so the RMSE is in index points.
pub fn evaluate(
    model: &FittedModel,
    config: &str,
    test: &DesignMatrix,
    top_k: usize,
    by_abs: bool,
) -> Result<EvalReport, ReportError> {
    let predicted = predict(model, test)?;
    let actual: Vec<f64> = if test.scaled {
        let scaler = model.scaler.as_ref().ok_or(ReportError::MissingScaler)?;
        test.y
            .iter()
            .map(|&v| scaler.unscale_target(v).map_err(ModelError::from))
            .collect::<Result<_, _>>()?
    } else {
        test.y.iter().copied().collect()
    };
    let score = rmse(&predicted, &actual)?;
    Ok(EvalReport {
        model: model.spec.kind,
        config: config.to_string(),
        rmse_index_units: score,
        lambda: model.spec.lambda,
        mix: model.spec.mix,
        predictions: test
            .dates
            .iter()
            .zip(actual.iter().zip(&predicted))
            .map(|(&date, (&actual, &predicted))| PredictionRow { date, actual, predicted })
            .collect(),
        intercept: model.intercept,
        coefficients: model
            .named_coefficients()
            .map(|(f, c)| RankedCoefficient {
                feature: f.to_string(),
                coefficient: c,
            })
            .collect(),
        top_sentiment: top_k_sentiment_coeffs(model, top_k, by_abs),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" | "markdown-table" => Ok(ReportFormat::Markdown),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

/// Model kind × configuration grid of test RMSEs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub configs: Vec<String>,
    pub rows: Vec<(ModelKind, Vec<Option<f64>>)>,
}

impl ComparisonTable {
    pub fn from_reports(reports: &[EvalReport]) -> Result<Self, ReportError> {
        if reports.is_empty() {
            return Err(ReportError::NothingToReport);
        }
        let configs: Vec<String> = reports
            .iter()
            .map(|r| r.config.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut cells: BTreeMap<ModelKind, Vec<Option<f64>>> = BTreeMap::new();
        for r in reports {
            let col = configs.iter().position(|c| c == &r.config).expect("config collected above");
            let row = cells.entry(r.model).or_insert_with(|| vec![None; configs.len()]);
            if row[col].is_some() {
                return Err(ReportError::Duplicate {
                    model: r.model,
                    config: r.config.clone(),
                });
            }
            row[col] = Some(r.rmse_index_units);
        }
        Ok(ComparisonTable {
            configs,
            rows: cells.into_iter().collect(),
        })
    }

    pub fn get(&self, model: ModelKind, config: &str) -> Option<f64> {
        let col = self.configs.iter().position(|c| c == config)?;
        self.rows.iter().find(|(m, _)| *m == model)?.1[col]
    }

    fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["model".to_string()];
        header.extend(self.configs.iter().cloned());
        w.write_record(&header)?;
        for (model, values) in &self.rows {
            let mut rec = vec![model.code().to_string()];
            rec.extend(values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    fn to_markdown(&self) -> String {
        let mut out = String::from("| Model |");
        for c in &self.configs {
            out.push_str(&format!(" {c} |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.configs.len()));
        out.push('\n');
        for (model, values) in &self.rows {
            out.push_str(&format!("| {} |", model.label()));
            for v in values {
                match v {
                    Some(x) => out.push_str(&format!(" {x:.4} |")),
                    None => out.push_str(" |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn read_comparison_csv(path: impl AsRef<Path>) -> Result<ComparisonTable, ReportError> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(data.as_slice());
    let header = r.headers().map_err(|e| ReportError::Malformed(e.to_string()))?.clone();
    if header.get(0) != Some("model") {
        return Err(ReportError::Malformed("first column must be `model`".into()));
    }
    let configs: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| ReportError::Malformed(e.to_string()))?;
        let model: ModelKind = rec[0].parse()?;
        let values = rec
            .iter()
            .skip(1)
            .map(|v| {
                if v.is_empty() {
                    Ok(None)
                } else {
                    v.parse::<f64>()
                        .map(Some)
                        .map_err(|e| ReportError::Malformed(format!("{v:?}: {e}")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((model, values));
    }
    Ok(ComparisonTable { configs, rows })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn csv_bytes(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let bad = |e: csv::Error| ReportError::Malformed(e.to_string());
    w.write_record(header).map_err(bad)?;
    for r in rows {
        w.write_record(&r).map_err(bad)?;
    }
    w.into_inner().map_err(|e| ReportError::Malformed(e.to_string()))
}

/// Writes the comparison grid plus per-model predictions and coefficients
/// into `dir`, returning the files written.
///
/// `comparison.csv`, `predictions.csv`, `coefficients.csv` and
/// `top_sentiment.csv` are always written; `format` adds `comparison.json`
/// or `comparison.md`. Each model/config pair also gets a plot-ready
/// `predictions/<model>_<config>.csv` of `date,actual,predicted`.
pub fn emit_report(
    reports: &[EvalReport],
    format: ReportFormat,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, ReportError> {
    let table = ComparisonTable::from_reports(reports)?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.model.cmp(&b.model).then_with(|| a.config.cmp(&b.config)));

    let path = dir.join("comparison.csv");
    let mut buf = Vec::new();
    table
        .write_csv(&mut buf)
        .map_err(|e| ReportError::Malformed(e.to_string()))?;
    write_file(&path, &buf)?;
    written.push(path);

    match format {
        ReportFormat::Csv => {}
        ReportFormat::Json => {
            let path = dir.join("comparison.json");
            let doc = serde_json::json!({ "comparison": table, "reports": sorted });
            let mut text = serde_json::to_string_pretty(&doc).expect("report values serialise");
            text.push('\n');
            write_file(&path, text.as_bytes())?;
            written.push(path);
        }
        ReportFormat::Markdown => {
            let path = dir.join("comparison.md");
            write_file(&path, table.to_markdown().as_bytes())?;
            written.push(path);
        }
    }

    let path = dir.join("predictions.csv");
    let rows = sorted.iter().flat_map(|r| {
        r.predictions.iter().map(move |p| {
            vec![
                r.model.code().to_string(),
                r.config.clone(),
                p.date.to_string(),
                p.actual.to_string(),
                p.predicted.to_string(),
            ]
        })
    });
    write_file(&path, &csv_bytes(&["model", "config", "date", "actual", "predicted"], rows)?)?;
    written.push(path);

    let series_dir = dir.join("predictions");
    fs::create_dir_all(&series_dir).map_err(io_err(&series_dir))?;
    for r in &sorted {
        let path = series_dir.join(format!("{}_{}.csv", r.model.code(), r.config));
        let rows = r.predictions.iter().map(|p| {
            vec![p.date.to_string(), p.actual.to_string(), p.predicted.to_string()]
        });
        write_file(&path, &csv_bytes(&["date", "actual", "predicted"], rows)?)?;
        written.push(path);
    }

    let path = dir.join("coefficients.csv");
    let rows = sorted.iter().flat_map(|r| {
        let head = vec![
            r.model.code().to_string(),
            r.config.clone(),
            "(intercept)".to_string(),
            r.intercept.to_string(),
        ];
        std::iter::once(head).chain(r.coefficients.iter().map(move |c| {
            vec![
                r.model.code().to_string(),
                r.config.clone(),
                c.feature.clone(),
                c.coefficient.to_string(),
            ]
        }))
    });
    write_file(&path, &csv_bytes(&["model", "config", "feature", "coefficient"], rows)?)?;
    written.push(path);

    let path = dir.join("top_sentiment.csv");
    let rows = sorted.iter().flat_map(|r| {
        r.top_sentiment.iter().enumerate().map(move |(i, c)| {
            vec![
                r.model.code().to_string(),
                r.config.clone(),
                (i + 1).to_string(),
                c.feature.clone(),
                c.coefficient.to_string(),
            ]
        })
    });
    write_file(&path, &csv_bytes(&["model", "config", "rank", "feature", "coefficient"], rows)?)?;
    written.push(path);

    Ok(written)
}
