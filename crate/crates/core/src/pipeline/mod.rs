//! End-to-end orchestration with content-addressed stage caching.
//!
//! Each stage's output is cached under `<out_dir>/cache`, keyed by a hash of
//! its parameters, the keys of the stages it consumes, and the bytes of any
//! input file it reads. Changing an input therefore recomputes exactly the
//! stages downstream of it.

mod cache;
mod config;

pub use config::{CrawlSettings, PipelineConfig, BUNDLED_LEXICON};

use std::error::Error as StdError;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use url::Url;

use self::cache::{content_key, file_digest, StageCache};
use crate::corpus::{self, crawl_archive, ArchiveLayout, CrawlPolicy, CrawlStore, HttpFetcher, NewsItem};
use crate::dates::DateRange;
use crate::models::{grid_search, FittedModel, GridPoint, ModelError, ModelKind, ModelSpec};
use crate::panel::{
    aggregate_daily, join_calendar, load_ohlc, make_lagged, split, DailyPanel, DesignMatrix, FeatureSet,
    JoinedTable, Scaler,
};
use crate::report::{emit_report, evaluate, EvalReport, ReportError};
use crate::sentiment::{load_external_scores, score_items, Lexicon, ScoredItems, SentimentEngine};
use crate::topics::{assign_topics, build_catalog, TopicAssignment, TopicCatalog, TopicRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{stage} stage: {source}")]
    Stage {
        stage: String,
        kind: FailureKind,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
}

impl PipelineError {
    /// 1 for usage and configuration errors, 2 for bad data, 3 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Stage {
                kind: FailureKind::Numeric,
                ..
            } => 3,
            _ => 2,
        }
    }
}

fn data_err<E: Into<Box<dyn StdError + Send + Sync>>>(stage: &str) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError::Stage {
        stage: stage.to_string(),
        kind: FailureKind::Data,
        source: e.into(),
    }
}

fn model_err(stage: &str, e: ModelError) -> PipelineError {
    match e {
        ModelError::InvalidSpec(_) | ModelError::EmptyGrid => PipelineError::Config(e.to_string()),
        e => PipelineError::Stage {
            stage: stage.to_string(),
            kind: if e.is_numeric() {
                FailureKind::Numeric
            } else {
                FailureKind::Data
            },
            source: Box::new(e),
        },
    }
}

fn report_err(stage: &str, e: ReportError) -> PipelineError {
    match e {
        ReportError::Model(m) => model_err(stage, m),
        e => data_err(stage)(e),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Computed,
    Cached,
}

#[derive(Debug, Clone)]
pub struct Staged<T> {
    pub key: String,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicStage {
    pub catalog: TopicCatalog,
    pub assignment: TopicAssignment,
}

/// One model fitted under one feature configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub config: String,
    pub lags: usize,
    pub features: FeatureSet,
    pub model: FittedModel,
    pub grid: Vec<GridPoint>,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub stages: Vec<(String, StageStatus)>,
    pub outcomes: Vec<FitOutcome>,
    /// Report files, in the order written.
    pub outputs: Vec<PathBuf>,
}

/// Name of a feature configuration, e.g. `with_sentiment_lag3`.
pub fn config_name(features: FeatureSet, lags: usize) -> String {
    match features {
        FeatureSet::WithSentiment => format!("with_sentiment_lag{lags}"),
        FeatureSet::PriceOnly => format!("without_sentiment_lag{lags}"),
    }
}

/// Lazily evaluated, memoised stages over one configuration.
pub struct Pipeline {
    cfg: PipelineConfig,
    cache: StageCache,
    statuses: Vec<(String, StageStatus)>,
    corpus: Option<Staged<Vec<NewsItem>>>,
    topics: Option<Staged<TopicStage>>,
    scores: Option<Staged<ScoredItems>>,
    panel: Option<Staged<DailyPanel>>,
    joined: Option<Staged<JoinedTable>>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Self {
        let cache = StageCache::new(cfg.out_dir.join("cache"));
        Pipeline {
            cfg,
            cache,
            statuses: Vec::new(),
            corpus: None,
            topics: None,
            scores: None,
            panel: None,
            joined: None,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn statuses(&self) -> &[(String, StageStatus)] {
        &self.statuses
    }

    fn cached<T, F>(&mut self, stage: &str, parts: serde_json::Value, compute: F) -> Result<Staged<T>, PipelineError>
    where
        T: Serialize + serde::de::DeserializeOwned,
        F: FnOnce() -> Result<T, PipelineError>,
    {
        let key = content_key(&json!({ "stage": stage, "parts": parts }));
        let (value, status) = self.cache.get_or_compute(stage, &key, compute)?;
        log::info!("{stage}: {status:?}");
        self.statuses.push((stage.to_string(), status));
        Ok(Staged { key, value })
    }

    fn crawl(&self, c: &CrawlSettings) -> Result<PathBuf, PipelineError> {
        let stage = "crawl";
        let base = Url::parse(&c.base_url).map_err(|e| PipelineError::Config(format!("crawl.base_url: {e}")))?;
        let mut policy = CrawlPolicy {
            min_delay: Duration::from_millis(c.min_delay_ms),
            max_concurrent: c.max_concurrent,
            max_retries: c.max_retries,
            ..CrawlPolicy::default()
        };
        if let Some(ua) = &c.user_agent {
            policy.user_agent = ua.clone();
        }
        policy.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        let layout = ArchiveLayout::new(&c.archive_template, &c.article_pattern, &c.container_selector)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let (Some(from), Some(to)) = (c.from, c.to) else {
            return Err(PipelineError::Config("crawl needs from and to dates".into()));
        };
        let dates = DateRange::new(from, to);
        let store_path = self.cfg.crawl_store().expect("crawl configured");
        if let Some(parent) = store_path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let mut store = CrawlStore::open(&store_path).map_err(data_err(stage))?;
        let fetcher = HttpFetcher::new(&policy).map_err(data_err(stage))?;
        let summary = crawl_archive(&base, dates, &policy, &layout, &fetcher, &mut store).map_err(data_err(stage))?;
        log::info!(
            "crawl: {} pages fetched, {} resumed, {} failed; {} articles fetched, {} failed",
            summary.pages_fetched,
            summary.pages_resumed,
            summary.pages_failed,
            summary.articles_fetched,
            summary.articles_failed
        );
        Ok(store_path)
    }

    pub fn corpus(&mut self) -> Result<Staged<Vec<NewsItem>>, PipelineError> {
        if let Some(s) = &self.corpus {
            return Ok(s.clone());
        }
        let path = match (&self.cfg.corpus, &self.cfg.crawl) {
            (Some(p), None) => p.clone(),
            (None, Some(c)) => self.crawl(&c.clone())?,
            (Some(_), Some(_)) => return Err(PipelineError::Config("set either corpus or crawl, not both".into())),
            (None, None) => return Err(PipelineError::Config("no corpus source: set corpus or crawl".into())),
        };
        let digest = file_digest(&path).map_err(io_err(&path))?;
        let staged = self.cached("corpus", json!({ "file": digest }), || {
            corpus::load_corpus(&path).map_err(data_err("corpus"))
        })?;
        self.corpus = Some(staged.clone());
        Ok(staged)
    }

    pub fn topics(&mut self) -> Result<Staged<TopicStage>, PipelineError> {
        if let Some(s) = &self.topics {
            return Ok(s.clone());
        }
        let corpus = self.corpus()?;
        let rule = TopicRule {
            segment_index: self.cfg.topic_segment_index,
            aliases: self.cfg.topic_aliases.clone(),
        };
        let threshold = self.cfg.topic_threshold;
        let parts = json!({ "corpus": corpus.key, "threshold": threshold, "rule": rule });
        let staged = self.cached("topics", parts, || {
            let catalog = build_catalog(&corpus.value, threshold, &rule).map_err(data_err("topics"))?;
            let assignment = assign_topics(&corpus.value, &catalog);
            log::info!(
                "topics: {} raw, {} retained; {} items kept, {} below threshold, {} without topic",
                catalog.entries.len(),
                catalog.retained.len(),
                assignment.items.len(),
                assignment.below_threshold,
                assignment.without_topic
            );
            Ok(TopicStage { catalog, assignment })
        })?;
        self.topics = Some(staged.clone());
        Ok(staged)
    }

    pub fn scores(&mut self) -> Result<Staged<ScoredItems>, PipelineError> {
        if let Some(s) = &self.scores {
            return Ok(s.clone());
        }
        let topics = self.topics()?;
        let stage = "score";
        let (engine_parts, source) = match (&self.cfg.lexicon, &self.cfg.scores) {
            (Some(lex), None) => {
                let digest = if lex == BUNDLED_LEXICON {
                    content_key(&json!(Lexicon::bundled_source()))
                } else {
                    file_digest(Path::new(lex)).map_err(io_err(Path::new(lex)))?
                };
                (
                    json!({ "lexicon": digest, "alpha": self.cfg.alpha, "negation": self.cfg.negation }),
                    ScoreSourceConfig::Lexicon(lex.clone()),
                )
            }
            (None, Some(path)) => {
                let digest = file_digest(path).map_err(io_err(path))?;
                (
                    json!({ "scores": digest, "epsilon": self.cfg.epsilon }),
                    ScoreSourceConfig::External(path.clone()),
                )
            }
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config(
                    "exactly one sentiment source is allowed: set lexicon or scores, not both".into(),
                ))
            }
            (None, None) => return Err(PipelineError::Config("no sentiment source: set lexicon or scores".into())),
        };
        let (alpha, negation, epsilon) = (self.cfg.alpha, self.cfg.negation, self.cfg.epsilon);
        let parts = json!({ "topics": topics.key, "engine": engine_parts });
        let staged = self.cached(stage, parts, || {
            let engine = match source {
                ScoreSourceConfig::Lexicon(lex) => SentimentEngine::Lexicon {
                    lexicon: if lex == BUNDLED_LEXICON {
                        Lexicon::bundled()
                    } else {
                        Lexicon::load(&lex).map_err(data_err(stage))?
                    },
                    alpha,
                    negation,
                },
                ScoreSourceConfig::External(path) => SentimentEngine::External {
                    outputs: load_external_scores(&path).map_err(data_err(stage))?,
                    epsilon,
                },
            };
            let scored = score_items(&topics.value.assignment.items, &engine).map_err(data_err(stage))?;
            if scored.missing > 0 {
                log::warn!("{} items have no classifier score and are left out", scored.missing);
            }
            Ok(scored)
        })?;
        self.scores = Some(staged.clone());
        Ok(staged)
    }

    pub fn panel(&mut self) -> Result<Staged<DailyPanel>, PipelineError> {
        if let Some(s) = &self.panel {
            return Ok(s.clone());
        }
        let topics = self.topics()?;
        let scores = self.scores()?;
        let agg = self.cfg.aggregate;
        let parts = json!({ "topics": topics.key, "scores": scores.key, "aggregate": agg });
        let staged = self.cached("panel", parts, || {
            aggregate_daily(
                &topics.value.assignment.items,
                &scores.value.scores,
                &topics.value.catalog,
                agg,
            )
            .map_err(data_err("panel"))
        })?;
        self.panel = Some(staged.clone());
        Ok(staged)
    }

    pub fn joined(&mut self) -> Result<Staged<JoinedTable>, PipelineError> {
        if let Some(s) = &self.joined {
            return Ok(s.clone());
        }
        let panel = self.panel()?;
        let ohlc_path = self
            .cfg
            .ohlc
            .clone()
            .ok_or_else(|| PipelineError::Config("ohlc is required".into()))?;
        let digest = file_digest(&ohlc_path).map_err(io_err(&ohlc_path))?;
        let parts = json!({ "panel": panel.key, "ohlc": digest });
        let staged = self.cached("join", parts, || {
            let ohlc = load_ohlc(&ohlc_path).map_err(data_err("join"))?;
            join_calendar(&panel.value, &ohlc).map_err(data_err("join"))
        })?;
        self.joined = Some(staged.clone());
        Ok(staged)
    }

    /// Feature configurations in run order.
    pub fn feature_configs(&self) -> Vec<(FeatureSet, usize)> {
        let mut out = Vec::new();
        for &l in &self.cfg.lags {
            out.push((FeatureSet::WithSentiment, l));
            if self.cfg.baseline {
                out.push((FeatureSet::PriceOnly, l));
            }
        }
        out
    }

    /// Lagged design matrix for one configuration.
    pub fn design(&mut self, features: FeatureSet, lags: usize) -> Result<DesignMatrix, PipelineError> {
        let joined = self.joined()?;
        make_lagged(&joined.value, lags, features).map_err(data_err("lag"))
    }

    pub fn fit(&mut self, kind: ModelKind, features: FeatureSet, lags: usize) -> Result<FitOutcome, PipelineError> {
        let joined = self.joined()?;
        let cfg = &self.cfg;
        let name = config_name(features, lags);
        let stage = format!("fit-{}-{name}", kind.code());
        let plan = cfg.split_plan();
        let parts = json!({
            "joined": joined.key,
            "kind": kind,
            "features": features,
            "lags": lags,
            "split": plan,
            "grid": cfg.grid,
            "tol": cfg.tol,
            "max_iter": cfg.max_iter,
            "scale": cfg.scale,
            "trading_days_only": cfg.trading_days_only,
            "top_k": cfg.top_k,
            "rank_by_abs": cfg.rank_by_abs,
        });
        let (scale, trading_only, top_k, by_abs) = (cfg.scale, cfg.trading_days_only, cfg.top_k, cfg.rank_by_abs);
        let grid = cfg.grid.clone();
        let base = ModelSpec {
            kind,
            lambda: 0.0,
            mix: (kind == ModelKind::Enet).then_some(0.5),
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            fit_intercept: true,
        };
        let staged = self.cached(&stage.clone(), parts, || {
            let design = make_lagged(&joined.value, lags, features).map_err(data_err(&stage))?;
            let (mut train, mut test) = split(&design, &plan).map_err(data_err(&stage))?;
            let scaler = if scale {
                let s = Scaler::fit(&train).map_err(data_err(&stage))?;
                train = s.apply(&train).map_err(data_err(&stage))?;
                test = s.apply(&test).map_err(data_err(&stage))?;
                Some(s)
            } else {
                None
            };
            if trading_only {
                let rows: Vec<usize> = (0..test.n_rows()).filter(|&r| test.trading_day[r]).collect();
                test = test.select_rows(&rows);
            }
            let search = grid_search(&base, &grid, &train, scaler.as_ref()).map_err(|e| model_err(&stage, e))?;
            let report = evaluate(&search.best, &name, &test, top_k, by_abs).map_err(|e| report_err(&stage, e))?;
            Ok(FitOutcome {
                config: name.clone(),
                lags,
                features,
                model: search.best,
                grid: search.points,
                report,
            })
        })?;
        Ok(staged.value)
    }

    /// Runs every stage and writes the report, model exports and panel
    /// exports into `out_dir`.
    pub fn run(&mut self) -> Result<RunSummary, PipelineError> {
        self.cfg.validate()?;
        let out_dir = self.cfg.out_dir.clone();
        fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
        let mut outputs = Vec::new();

        let topics = self.topics()?;
        let path = out_dir.join("topics.csv");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        topics.value.catalog.write_csv(file).map_err(data_err("topics"))?;
        outputs.push(path);

        let panel = self.panel()?;
        let path = out_dir.join("panel.csv");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        panel.value.write_csv(file).map_err(data_err("panel"))?;
        outputs.push(path);

        let mut outcomes = Vec::new();
        for (features, lags) in self.feature_configs() {
            for kind in self.cfg.models.clone() {
                outcomes.push(self.fit(kind, features, lags)?);
            }
        }

        let models_dir = out_dir.join("models");
        fs::create_dir_all(&models_dir).map_err(io_err(&models_dir))?;
        for o in &outcomes {
            let path = models_dir.join(format!("{}_{}.json", o.model.spec.kind.code(), o.config));
            let mut text = serde_json::to_string_pretty(&o.model).map_err(|e| PipelineError::Cache(e.to_string()))?;
            text.push('\n');
            fs::write(&path, text).map_err(io_err(&path))?;
            outputs.push(path);
        }

        let reports: Vec<EvalReport> = outcomes.iter().map(|o| o.report.clone()).collect();
        outputs.extend(emit_report(&reports, self.cfg.format, &out_dir).map_err(|e| report_err("report", e))?);
        Ok(RunSummary {
            stages: self.statuses.clone(),
            outcomes,
            outputs,
        })
    }
}

enum ScoreSourceConfig {
    Lexicon(String),
    External(PathBuf),
}

/// Validates `cfg` and runs the whole pipeline.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    Pipeline::new(cfg.clone()).run()
}
