use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::de::{DeserializeOwned, Deserializer, Error as _};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PipelineError;
use crate::dates::DateRange;
use crate::models::{HyperGrid, ModelKind, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::panel::{Aggregation, SplitPlan};
use crate::report::{ReportFormat, DEFAULT_TOP_K};
use crate::sentiment::{DEFAULT_ALPHA, DEFAULT_EPSILON};
use crate::topics::DEFAULT_THRESHOLD;

/// Lexicon value selecting the lexicon compiled into the library.
pub const BUNDLED_LEXICON: &str = "bundled";

const PATH_KEYS: [&str; 6] = ["corpus", "scores", "ohlc", "lexicon", "out_dir", "crawl.store"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlSettings {
    pub base_url: String,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    /// Archive page path with `{date}`, `{year}`, `{month}`, `{day}` or
    /// `{serial}` placeholders, resolved against `base_url`.
    pub archive_template: String,
    pub article_pattern: String,
    pub container_selector: String,
    pub min_delay_ms: u64,
    pub max_concurrent: usize,
    pub max_retries: u32,
    pub user_agent: Option<String>,
    /// Append-only item store; defaults to `<out_dir>/crawl.jsonl`.
    pub store: Option<PathBuf>,
}

impl Default for CrawlSettings {
    fn default() -> Self {
        CrawlSettings {
            base_url: String::new(),
            from: None,
            to: None,
            archive_template: String::new(),
            article_pattern: String::new(),
            container_selector: "article".into(),
            min_delay_ms: 1000,
            max_concurrent: 1,
            max_retries: 3,
            user_agent: None,
            store: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub crawl: Option<CrawlSettings>,
    /// Lexicon file, or `"bundled"`.
    pub lexicon: Option<String>,
    /// Classifier scores file; selects the external sentiment engine.
    pub scores: Option<PathBuf>,
    pub ohlc: Option<PathBuf>,

    pub topic_threshold: usize,
    pub topic_segment_index: usize,
    pub topic_aliases: BTreeMap<String, String>,

    pub alpha: f64,
    pub negation: bool,
    pub epsilon: f64,
    pub aggregate: Aggregation,

    #[serde(deserialize_with = "de_list")]
    pub lags: Vec<usize>,
    /// Also fit every model without sentiment features.
    pub baseline: bool,
    #[serde(deserialize_with = "de_range")]
    pub train: DateRange,
    #[serde(deserialize_with = "de_range")]
    pub test: DateRange,
    #[serde(deserialize_with = "de_list")]
    pub exclude: Vec<DateRange>,
    #[serde(deserialize_with = "de_list")]
    pub models: Vec<ModelKind>,
    pub grid: HyperGrid,
    pub tol: f64,
    pub max_iter: usize,
    /// Min-max scale price lags and the target on the training rows.
    pub scale: bool,

    /// Drop weekend and holiday rows from the test split before scoring.
    pub trading_days_only: bool,
    pub top_k: usize,
    pub rank_by_abs: bool,
    pub format: ReportFormat,
    pub out_dir: PathBuf,
    /// Only used for fixture generation.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let split = SplitPlan::default();
        PipelineConfig {
            corpus: None,
            crawl: None,
            lexicon: None,
            scores: None,
            ohlc: None,
            topic_threshold: DEFAULT_THRESHOLD,
            topic_segment_index: 1,
            topic_aliases: BTreeMap::new(),
            alpha: DEFAULT_ALPHA,
            negation: false,
            epsilon: DEFAULT_EPSILON,
            aggregate: Aggregation::Mean,
            lags: vec![3, 5],
            baseline: true,
            train: split.train,
            test: split.test,
            exclude: split.exclude,
            models: ModelKind::ALL.to_vec(),
            grid: HyperGrid::default(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            scale: true,
            trading_days_only: false,
            top_k: DEFAULT_TOP_K,
            rank_by_abs: false,
            format: ReportFormat::Csv,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Accepts a single `START..END` string or a `{start, end}` object.
fn de_range<'de, D: Deserializer<'de>>(d: D) -> Result<DateRange, D::Error> {
    let v = Value::deserialize(d)?;
    parse_item(v).map_err(D::Error::custom)
}

/// Accepts an array, a comma-separated string, or a single value.
fn de_list<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr + DeserializeOwned,
    T::Err: Display,
{
    let items = match Value::deserialize(d)? {
        Value::Array(a) => a,
        Value::String(s) => s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| Value::String(p.to_string()))
            .collect(),
        other => vec![other],
    };
    items.into_iter().map(parse_item).collect::<Result<_, _>>().map_err(D::Error::custom)
}

fn parse_item<T>(v: Value) -> Result<T, String>
where
    T: FromStr + DeserializeOwned,
    T::Err: Display,
{
    match v {
        Value::String(s) => s.trim().parse().map_err(|e: T::Err| format!("{s:?}: {e}")),
        other => serde_json::from_value(other).map_err(|e| e.to_string()),
    }
}

/// Sets `path` (dot-separated) in a JSON object tree.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), PipelineError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(PipelineError::Config(format!("bad key {path:?}")));
        }
        if !cur.is_object() {
            if cur.is_null() {
                *cur = Value::Object(Default::default());
            } else {
                return Err(PipelineError::Config(format!("key {path:?}: {part:?} is not a section")));
            }
        }
        let obj = cur.as_object_mut().expect("object ensured above");
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

fn get_path<'a>(root: &'a mut Value, path: &str) -> Option<&'a mut Value> {
    path.split('.').try_fold(root, |cur, part| cur.get_mut(part))
}

/// Interprets a raw override: JSON when it parses, a plain string otherwise.
fn raw_value(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn parse_assignment(line: &str) -> Result<(&str, &str), PipelineError> {
    line.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| PipelineError::Config(format!("expected key=value, got {line:?}")))
}

impl PipelineConfig {
    /// Reads a JSON document or flat `key = value` lines (`#` comments,
    /// dotted keys for sections), then applies `overrides` of the same
    /// `key=value` form.
    ///
    /// Relative paths in the file resolve against the file's directory;
    /// relative paths in overrides are left as given.
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut doc = Self::parse_document(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for key in PATH_KEYS {
            if let Some(Value::String(p)) = get_path(&mut doc, key) {
                if !(key == "lexicon" && p == BUNDLED_LEXICON) && Path::new(p.as_str()).is_relative() {
                    *p = base.join(p.as_str()).to_string_lossy().into_owned();
                }
            }
        }
        Self::from_value(doc, overrides)
    }

    /// Builds a config from defaults plus `key=value` overrides only.
    pub fn from_overrides(overrides: &[String]) -> Result<Self, PipelineError> {
        Self::from_value(Value::Object(Default::default()), overrides)
    }

    fn parse_document(text: &str) -> Result<Value, PipelineError> {
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text).map_err(|e| PipelineError::Config(format!("config json: {e}")));
        }
        let mut doc = Value::Object(Default::default());
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = parse_assignment(line)?;
            set_path(&mut doc, k, raw_value(v))?;
        }
        Ok(doc)
    }

    fn from_value(mut doc: Value, overrides: &[String]) -> Result<Self, PipelineError> {
        for o in overrides {
            let (k, v) = parse_assignment(o)?;
            set_path(&mut doc, k, raw_value(v))?;
        }
        serde_json::from_value(doc).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn split_plan(&self) -> SplitPlan {
        SplitPlan {
            train: self.train,
            test: self.test,
            exclude: self.exclude.clone(),
        }
    }

    pub fn crawl_store(&self) -> Option<PathBuf> {
        self.crawl
            .as_ref()
            .map(|c| c.store.clone().unwrap_or_else(|| self.out_dir.join("crawl.jsonl")))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        match (&self.corpus, &self.crawl) {
            (Some(_), Some(_)) => return bad("set either corpus or crawl, not both".into()),
            (None, None) => return bad("no corpus source: set corpus or crawl".into()),
            (None, Some(c)) => {
                if c.base_url.is_empty() || c.archive_template.is_empty() || c.article_pattern.is_empty() {
                    return bad("crawl needs base_url, archive_template and article_pattern".into());
                }
                if c.from.is_none() || c.to.is_none() {
                    return bad("crawl needs from and to dates".into());
                }
            }
            _ => {}
        }
        match (&self.lexicon, &self.scores) {
            (Some(_), Some(_)) => {
                return bad("exactly one sentiment source is allowed: set lexicon or scores, not both".into())
            }
            (None, None) => return bad("no sentiment source: set lexicon or scores".into()),
            _ => {}
        }
        if self.ohlc.is_none() {
            return bad("ohlc is required".into());
        }
        if self.topic_threshold == 0 {
            return bad("topic_threshold must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha {} must be positive", self.alpha));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad(format!("epsilon {} outside (0, 0.5)", self.epsilon));
        }
        if self.lags.is_empty() || self.lags.contains(&0) {
            return bad("lags must be a non-empty list of positive integers".into());
        }
        if self.models.is_empty() {
            return bad("models must not be empty".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol {} must be positive", self.tol));
        }
        self.split_plan()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        for kind in &self.models {
            self.grid
                .validate(*kind)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn defaults_follow_documented_values() {
        let c = PipelineConfig::default();
        assert_eq!(c.topic_threshold, 200);
        assert_eq!(c.alpha, 15.0);
        assert_eq!(c.lags, [3, 5]);
        assert_eq!(c.train.end, d("2023-08-31"));
        assert_eq!(c.exclude.len(), 1);
        assert_eq!(c.models.len(), 4);
    }

    #[test]
    fn flat_file_with_sections_and_lists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(
            &path,
            "# comment\ncorpus = corpus.jsonl\nlexicon = bundled\nohlc = /abs/ohlc.csv\nlags = 3,5\n\
             models = ols, ridge\ntrain = 2023-01-01..2023-03-31\nexclude = 2023-04-01..2023-04-07\n\
             grid.lambdas = [0.1, 1]\ntopic_aliases.markets = market\n",
        )
        .unwrap();
        let c = PipelineConfig::load(&path, &["alpha=10".into(), "out_dir=rel".into()]).unwrap();
        assert_eq!(c.corpus.unwrap(), dir.path().join("corpus.jsonl"));
        assert_eq!(c.lexicon.as_deref(), Some("bundled"));
        assert_eq!(c.ohlc.unwrap(), PathBuf::from("/abs/ohlc.csv"));
        assert_eq!(c.models, [ModelKind::Ols, ModelKind::Ridge]);
        assert_eq!(c.train, DateRange::new(d("2023-01-01"), d("2023-03-31")));
        assert_eq!(c.exclude, [DateRange::new(d("2023-04-01"), d("2023-04-07"))]);
        assert_eq!(c.grid.lambdas, [0.1, 1.0]);
        assert_eq!(c.topic_aliases["markets"], "market");
        assert_eq!(c.alpha, 10.0);
        assert_eq!(c.out_dir, PathBuf::from("rel"));
    }

    #[test]
    fn json_document() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{"corpus": "c.jsonl", "scores": "s.jsonl", "ohlc": "o.csv", "lags": [3],
                "train": {"start": "2023-01-01", "end": "2023-02-01"}}"#,
        )
        .unwrap();
        let c = PipelineConfig::load(&path, &[]).unwrap();
        assert_eq!(c.lags, [3]);
        assert_eq!(c.scores.unwrap(), dir.path().join("s.jsonl"));
        assert_eq!(c.train.end, d("2023-02-01"));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(PipelineConfig::from_overrides(&["lagz=3".into()]).is_err());
        assert!(PipelineConfig::from_overrides(&["noequals".into()]).is_err());
    }

    #[test]
    fn both_sentiment_sources_rejected() {
        let c = PipelineConfig::from_overrides(&[
            "corpus=c".into(),
            "ohlc=o".into(),
            "lexicon=bundled".into(),
            "scores=s.jsonl".into(),
        ])
        .unwrap();
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("exactly one sentiment source"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn neither_sentiment_source_rejected() {
        let c = PipelineConfig::from_overrides(&["corpus=c".into(), "ohlc=o".into()]).unwrap();
        assert!(c.validate().is_err());
    }
}
