use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topicsent"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/signal")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["run", "--no-such-flag"])), 1);
    assert_eq!(code(&run(&["fit", "--lags", "x"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn config_errors_exit_1() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture().join("config.json");
    let o = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.path().to_str().unwrap(),
        "--set",
        "lexicon=bundled",
    ]);
    assert_eq!(code(&o), 1, "{}", text(&o));
    assert!(text(&o).contains("exactly one sentiment source"));

    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--set", "no_such_key=1"]);
    assert_eq!(code(&o), 1, "{}", text(&o));
    let o = run(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(code(&o), 1, "{}", text(&o));
}

#[test]
fn data_errors_exit_2() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--config",
        fixture().join("config.json").to_str().unwrap(),
        "--out-dir",
        out.path().to_str().unwrap(),
        "--ohlc",
        out.path().join("missing.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", text(&o));
    assert!(text(&o).starts_with("error: "));
}

#[test]
fn run_writes_comparison_for_every_model() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--config",
        fixture().join("config.json").to_str().unwrap(),
        "--out-dir",
        out.path().to_str().unwrap(),
        "--format",
        "markdown",
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let csv = fs::read_to_string(out.path().join("comparison.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,with_sentiment_lag3,with_sentiment_lag5,without_sentiment_lag3,without_sentiment_lag5"
    );
    let models: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, ["ols", "ridge", "lasso", "enet"]);
    let md = fs::read_to_string(out.path().join("comparison.md")).unwrap();
    for label in ["Linear Regression", "Ridge Regression", "Lasso Regression", "Elastic Net Regression"] {
        assert!(md.contains(&format!("| {label} |")), "{label}");
    }
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().filter(|l| l.contains("rmse=")).count(), 16);
}

#[test]
fn stages_run_individually() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture().join("config.json");
    let base = ["--config", cfg.to_str().unwrap(), "--out-dir", out.path().to_str().unwrap()];

    let o = bin().arg("topics").args(base).output().unwrap();
    assert_eq!(code(&o), 0, "{}", text(&o));
    let topics = fs::read_to_string(out.path().join("topics.csv")).unwrap();
    assert_eq!(topics.lines().filter(|l| l.ends_with(",true")).count(), 3);

    let o = bin().arg("score").args(base).output().unwrap();
    assert_eq!(code(&o), 0, "{}", text(&o));
    assert!(out.path().join("scores.csv").is_file());

    let o = bin().arg("panel").args(base).args(["--lags", "3"]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", text(&o));
    let design = fs::read_to_string(out.path().join("design_with_sentiment_lag3.csv")).unwrap();
    // date + 7 bases x 3 lags + target
    assert_eq!(design.lines().next().unwrap().split(',').count(), 1 + 21 + 1);

    let o = bin().arg("fit").args(base).args(["--lags", "3", "--model", "ridge,lasso"]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", text(&o));
    assert!(out.path().join("models/ridge_with_sentiment_lag3.json").is_file());
    assert!(out.path().join("models/lasso_without_sentiment_lag3.json").is_file());
    assert!(!out.path().join("models/ols_with_sentiment_lag3.json").exists());

    let o = bin().arg("report").args(base).args(["--lags", "3", "--model", "ridge"]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", text(&o));
    let csv = fs::read_to_string(out.path().join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn fixture_command_matches_checked_in_files() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["fixture", "--out", out.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    for f in ["corpus.jsonl", "scores.jsonl", "ohlc.csv", "config.json", "config_lexicon.json"] {
        assert_eq!(
            fs::read(out.path().join(f)).unwrap(),
            fs::read(fixture().join(f)).unwrap(),
            "{f}"
        );
    }
}
