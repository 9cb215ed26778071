use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use topicsent::fixture::{generate, write_fixture, FixtureSpec};
use topicsent::pipeline::{config_name, Pipeline, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(name = "topicsent", version, about = "Topic-wise news sentiment versus a market index")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON or key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set alpha=10` or
    /// `--set grid.lambdas=[0.1,1]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    ohlc: Option<PathBuf>,
    /// Lexicon file or `bundled`.
    #[arg(long)]
    lexicon: Option<String>,
    /// Classifier scores file.
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<usize>,
    /// Reserved for fixture generation; nothing else is random.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Lexicon,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Markdown,
}

#[derive(Args, Clone, Default)]
struct Modeling {
    /// Lag depths, comma separated.
    #[arg(long, value_delimiter = ',')]
    lags: Vec<usize>,
    /// Model kinds (ols, ridge, lasso, enet), comma separated.
    #[arg(long = "model", value_delimiter = ',')]
    models: Vec<String>,
    /// JSON hyperparameter grid: {"lambdas": [...], "mixes": [...]}.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    aggregate: Option<String>,
}

#[derive(Args, Clone, Default)]
struct Reporting {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Rank sentiment coefficients by magnitude instead of signed value.
    #[arg(long)]
    abs: bool,
    #[arg(long)]
    top_k: Option<usize>,
    /// Score only rows that are trading days.
    #[arg(long)]
    trading_days_only: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Crawl a dated news archive into an append-only corpus store.
    Crawl {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        base_url: Option<String>,
        /// Archive path template with {date}/{year}/{month}/{day}/{serial}.
        #[arg(long)]
        template: Option<String>,
        /// Regex an article link must match.
        #[arg(long)]
        article_pattern: Option<String>,
        /// CSS selector of the article body container.
        #[arg(long)]
        container: Option<String>,
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
        #[arg(long)]
        min_delay_ms: Option<u64>,
        #[arg(long)]
        max_concurrent: Option<usize>,
        /// Corpus store to create or resume.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract URL topics and write the frequency catalog.
    Topics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score items of retained topics.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        engine: Option<Engine>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the daily panel, the joined table and lagged design matrices.
    Panel {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        modeling: Modeling,
    },
    /// Fit models and export them.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        modeling: Modeling,
    },
    /// Fit (or reuse cached fits) and write the report files.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        modeling: Modeling,
        #[command(flatten)]
        reporting: Reporting,
    },
    /// Run every stage end to end.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        modeling: Modeling,
        #[command(flatten)]
        reporting: Reporting,
    },
    /// Write the seeded synthetic fixture.
    Fixture {
        #[arg(long, default_value_t = FixtureSpec::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = FixtureSpec::default().days)]
        days: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn push(o: &mut Vec<String>, key: &str, v: impl ToString) {
    o.push(format!("{key}={}", v.to_string()));
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

impl Common {
    fn overrides(&self, o: &mut Vec<String>) {
        o.extend(self.set.iter().cloned());
        if let Some(p) = &self.out_dir {
            push(o, "out_dir", path_str(p));
        }
        if let Some(p) = &self.corpus {
            push(o, "corpus", path_str(p));
        }
        if let Some(p) = &self.ohlc {
            push(o, "ohlc", path_str(p));
        }
        if let Some(l) = &self.lexicon {
            push(o, "lexicon", l);
            push(o, "scores", "null");
        }
        if let Some(p) = &self.scores {
            push(o, "scores", path_str(p));
            push(o, "lexicon", "null");
        }
        if let Some(t) = self.threshold {
            push(o, "topic_threshold", t);
        }
        if let Some(s) = self.seed {
            push(o, "seed", s);
        }
    }

    fn load(&self, extra: Vec<String>) -> Result<PipelineConfig, PipelineError> {
        let mut o = Vec::new();
        self.overrides(&mut o);
        o.extend(extra);
        match &self.config {
            Some(path) => PipelineConfig::load(path, &o),
            None => PipelineConfig::from_overrides(&o),
        }
    }
}

impl Modeling {
    fn overrides(&self) -> Result<Vec<String>, PipelineError> {
        let mut o = Vec::new();
        if !self.lags.is_empty() {
            push(&mut o, "lags", format!("{:?}", self.lags));
        }
        if !self.models.is_empty() {
            push(&mut o, "models", self.models.join(","));
        }
        if let Some(g) = &self.grid {
            let text = fs::read_to_string(g).map_err(|source| PipelineError::Io {
                path: g.clone(),
                source,
            })?;
            push(&mut o, "grid", text);
        }
        if let Some(a) = &self.aggregate {
            push(&mut o, "aggregate", a);
        }
        Ok(o)
    }
}

impl Reporting {
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        if let Some(f) = self.format {
            let name = match f {
                Format::Csv => "csv",
                Format::Json => "json",
                Format::Markdown => "markdown",
            };
            push(&mut o, "format", name);
        }
        if self.abs {
            push(&mut o, "rank_by_abs", true);
        }
        if let Some(k) = self.top_k {
            push(&mut o, "top_k", k);
        }
        if self.trading_days_only {
            push(&mut o, "trading_days_only", true);
        }
        o
    }
}

fn create(path: &Path) -> Result<fs::File, PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| PipelineError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::File::create(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn stage_failure<E: std::error::Error + Send + Sync + 'static>(stage: &str) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError::Stage {
        stage: stage.to_string(),
        kind: topicsent::pipeline::FailureKind::Data,
        source: Box::new(e),
    }
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Crawl {
            common,
            base_url,
            template,
            article_pattern,
            container,
            from,
            to,
            min_delay_ms,
            max_concurrent,
            out,
        } => {
            let mut o = vec!["corpus=null".to_string()];
            let mut put = |k: &str, v: Option<String>| {
                if let Some(v) = v {
                    push(&mut o, &format!("crawl.{k}"), v);
                }
            };
            put("base_url", base_url);
            put("archive_template", template);
            put("article_pattern", article_pattern);
            put("container_selector", container);
            put("from", from.map(|d| d.to_string()));
            put("to", to.map(|d| d.to_string()));
            put("min_delay_ms", min_delay_ms.map(|v| v.to_string()));
            put("max_concurrent", max_concurrent.map(|v| v.to_string()));
            put("store", out.map(|p| path_str(&p)));
            let cfg = common.load(o)?;
            let store = cfg.crawl_store();
            let mut p = Pipeline::new(cfg);
            let corpus = p.corpus()?;
            println!(
                "{} items in {}",
                corpus.value.len(),
                store.map(|s| s.display().to_string()).unwrap_or_default()
            );
        }
        Command::Topics { common, out } => {
            let cfg = common.load(Vec::new())?;
            let out = out.unwrap_or_else(|| cfg.out_dir.join("topics.csv"));
            let mut p = Pipeline::new(cfg);
            let t = p.topics()?;
            t.value.catalog.write_csv(create(&out)?).map_err(stage_failure("topics"))?;
            println!(
                "{} raw topics, {} retained; {} items kept -> {}",
                t.value.catalog.entries.len(),
                t.value.catalog.retained.len(),
                t.value.assignment.items.len(),
                out.display()
            );
        }
        Command::Score { common, engine, out } => {
            let mut o = Vec::new();
            match engine {
                Some(Engine::Lexicon) if common.lexicon.is_none() => {
                    o.push("lexicon=bundled".into());
                    o.push("scores=null".into());
                }
                Some(Engine::External) if common.scores.is_none() => {
                    o.push("lexicon=null".into());
                }
                _ => {}
            }
            let cfg = common.load(o)?;
            let out = out.unwrap_or_else(|| cfg.out_dir.join("scores.csv"));
            let mut p = Pipeline::new(cfg);
            let s = p.scores()?;
            let mut file = std::io::BufWriter::new(create(&out)?);
            let mut text = String::from("id,score,source\n");
            for sc in &s.value.scores {
                let source = serde_json::to_value(sc.source).unwrap_or_default();
                text.push_str(&format!("{},{},{}\n", sc.id, sc.value, source.as_str().unwrap_or("")));
            }
            std::io::Write::write_all(&mut file, text.as_bytes()).map_err(|source| PipelineError::Io {
                path: out.clone(),
                source,
            })?;
            println!("{} items scored, {} without a score -> {}", s.value.scores.len(), s.value.missing, out.display());
        }
        Command::Panel { common, modeling } => {
            let cfg = common.load(modeling.overrides()?)?;
            let out_dir = cfg.out_dir.clone();
            let mut p = Pipeline::new(cfg);
            let panel = p.panel()?;
            let path = out_dir.join("panel.csv");
            panel.value.write_csv(create(&path)?).map_err(stage_failure("panel"))?;
            let joined = p.joined()?;
            let path = out_dir.join("joined.csv");
            joined.value.write_csv(create(&path)?).map_err(stage_failure("join"))?;
            for (features, lags) in p.feature_configs() {
                let design = p.design(features, lags)?;
                let path = out_dir.join(format!("design_{}.csv", config_name(features, lags)));
                design.write_csv(create(&path)?).map_err(stage_failure("lag"))?;
                println!("{}: {} rows x {} features", path.display(), design.n_rows(), design.columns.len());
            }
        }
        Command::Fit { common, modeling } => {
            let cfg = common.load(modeling.overrides()?)?;
            cfg.validate()?;
            let models_dir = cfg.out_dir.join("models");
            let kinds = cfg.models.clone();
            let mut p = Pipeline::new(cfg);
            for (features, lags) in p.feature_configs() {
                for &kind in &kinds {
                    let o = p.fit(kind, features, lags)?;
                    let path = models_dir.join(format!("{}_{}.json", kind.code(), o.config));
                    let mut text = serde_json::to_string_pretty(&o.model).expect("model serialises");
                    text.push('\n');
                    std::io::Write::write_all(&mut create(&path)?, text.as_bytes()).map_err(|source| {
                        PipelineError::Io {
                            path: path.clone(),
                            source,
                        }
                    })?;
                    println!(
                        "{:<6} {:<24} lambda={} mix={:?} test rmse={:.4}",
                        kind.code(),
                        o.config,
                        o.model.spec.lambda,
                        o.model.spec.mix,
                        o.report.rmse_index_units
                    );
                }
            }
        }
        Command::Report {
            common,
            modeling,
            reporting,
        }
        | Command::Run {
            common,
            modeling,
            reporting,
        } => {
            let mut o = modeling.overrides()?;
            o.extend(reporting.overrides());
            let cfg = common.load(o)?;
            let mut p = Pipeline::new(cfg);
            let summary = p.run()?;
            for o in &summary.outcomes {
                println!(
                    "{:<6} {:<24} rmse={:.4}",
                    o.model.spec.kind.code(),
                    o.config,
                    o.report.rmse_index_units
                );
            }
            println!("{} files written to {}", summary.outputs.len(), p.config().out_dir.display());
        }
        Command::Fixture { seed, days, out } => {
            let spec = FixtureSpec {
                seed,
                days,
                ..FixtureSpec::default()
            };
            let files = write_fixture(&generate(&spec), &out).map_err(|source| PipelineError::Io {
                path: out.clone(),
                source,
            })?;
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
