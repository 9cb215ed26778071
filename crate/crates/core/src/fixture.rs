//! Seeded synthetic corpus, classifier scores and index prices in which one
//! topic's sentiment drives the next day's close.
//!
//! Topic `a` has a latent daily sentiment `s(d)`. Its items come in pairs
//! scored `s(d) ± δ`, so their daily mean is exactly `s(d)` once converted
//! back through the log-odds map. Topics `b` and `c` carry unrelated
//! sentiment, `rare` falls below the topic threshold and a few items have no
//! topic at all. Prices trade on weekdays only and follow
//!
//! ```text
//! close(t) = close(previous trading day) + effect · s(t − 1 day) + N(0, noise_sd²)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde_json::json;

use crate::corpus::{write_corpus, NewsItem};
use crate::dates::{add_days, DateRange};
use crate::panel::OhlcRow;
use crate::sentiment::{ClassifierOutput, Label};

pub const SIGNAL_TOPIC: &str = "a";
const NOISE_TOPICS: [&str; 2] = ["b", "c"];
const POSITIVE_WORDS: [&str; 8] = ["gain", "rally", "surge", "profit", "growth", "strong", "boost", "record"];
const NEGATIVE_WORDS: [&str; 8] = ["loss", "slump", "crash", "weak", "decline", "fall", "fear", "plunge"];
const FILLER: [&str; 6] = ["the", "index", "traders", "said", "today", "shares"];
const HOST: &str = "https://news.fixture.test";

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub seed: u64,
    pub start: NaiveDate,
    pub days: usize,
    /// Items per day for each retained topic; must be even.
    pub items_per_topic_day: usize,
    /// Latent sentiment is uniform on `[-latent_bound, latent_bound]`.
    pub latent_bound: f64,
    /// Half-width of the within-pair spread.
    pub pair_spread: f64,
    pub rare_items: usize,
    pub untopical_items: usize,
    pub effect: f64,
    pub noise_sd: f64,
    pub start_close: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 7,
            start: NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date"),
            days: 120,
            items_per_topic_day: 2,
            latent_bound: 1.5,
            pair_spread: 0.4,
            rare_items: 20,
            untopical_items: 10,
            effect: 40.0,
            noise_sd: 2.0,
            start_close: 18000.0,
        }
    }
}

impl FixtureSpec {
    pub fn calendar(&self) -> DateRange {
        DateRange::new(self.start, add_days(self.start, self.days as i64 - 1))
    }

    /// Topic threshold that keeps `a`, `b`, `c` and drops `rare`.
    pub fn topic_threshold(&self) -> usize {
        self.rare_items + 1
    }

    /// Train on the first 70% of days, exclude the next week, test on the
    /// rest.
    pub fn split(&self) -> (DateRange, DateRange, DateRange) {
        let cal = self.calendar();
        let train_days = self.days * 7 / 10;
        let train = DateRange::new(cal.start, add_days(cal.start, train_days as i64 - 1));
        let exclude = DateRange::new(add_days(train.end, 1), add_days(train.end, 7));
        let test = DateRange::new(add_days(exclude.end, 1), cal.end);
        (train, exclude, test)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalFixture {
    pub spec: FixtureSpec,
    pub items: Vec<NewsItem>,
    pub scores: Vec<ClassifierOutput>,
    pub ohlc: Vec<OhlcRow>,
    /// Latent daily sentiment of the signal topic.
    pub latent: BTreeMap<NaiveDate, f64>,
}

/// Classifier output whose log-odds score is exactly `z` (up to rounding).
fn output_for(id: &str, z: f64) -> ClassifierOutput {
    ClassifierOutput {
        id: id.to_string(),
        label: if z < 0.0 { Label::Negative } else { Label::Positive },
        prob: 1.0 / (1.0 + 10f64.powf(-z.abs())),
    }
}

fn body_for<R: Rng>(rng: &mut R, z: f64) -> String {
    let words = if z < 0.0 { &NEGATIVE_WORDS } else { &POSITIVE_WORDS };
    let strong = (z.abs() * 2.0).round() as usize;
    let mut out: Vec<&str> = Vec::new();
    for i in 0..(strong + 3) {
        out.push(FILLER[(i + strong) % FILLER.len()]);
        if i < strong {
            out.push(words[rng.gen_range(0..words.len())]);
        }
    }
    out.join(" ")
}

pub fn generate(spec: &FixtureSpec) -> SignalFixture {
    assert!(spec.items_per_topic_day % 2 == 0, "items per topic-day must be even");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let latent_dist = Uniform::new_inclusive(-spec.latent_bound, spec.latent_bound);
    let spread_dist = Uniform::new_inclusive(0.0, spec.pair_spread);
    let noise = Normal::new(0.0, spec.noise_sd).expect("finite sd");

    let mut items = Vec::new();
    let mut scores = Vec::new();
    let mut latent = BTreeMap::new();
    let mut push = |items: &mut Vec<NewsItem>, rng: &mut ChaCha8Rng, date: NaiveDate, topic: Option<&str>, z: f64| {
        let n = items.len();
        let id = format!("fx{n:05}");
        let url = match topic {
            Some(t) => format!("{HOST}/news/{t}/story-{n}/articleshow/{n}.cms"),
            None => format!("{HOST}/about/{n}"),
        };
        scores.push(output_for(&id, z));
        items.push(NewsItem {
            id,
            date,
            url,
            headline: format!("Fixture story {n}"),
            body: body_for(rng, z),
            topic: None,
        });
    };

    let cal = spec.calendar();
    for date in cal.days() {
        let s = latent_dist.sample(&mut rng);
        latent.insert(date, s);
        for _ in 0..spec.items_per_topic_day / 2 {
            let d = spread_dist.sample(&mut rng);
            push(&mut items, &mut rng, date, Some(SIGNAL_TOPIC), s + d);
            push(&mut items, &mut rng, date, Some(SIGNAL_TOPIC), s - d);
        }
        for topic in NOISE_TOPICS {
            for _ in 0..spec.items_per_topic_day {
                let z = latent_dist.sample(&mut rng);
                push(&mut items, &mut rng, date, Some(topic), z);
            }
        }
    }
    for i in 0..spec.rare_items {
        let date = add_days(cal.start, (i * 5 % spec.days) as i64);
        let z = latent_dist.sample(&mut rng);
        push(&mut items, &mut rng, date, Some("rare"), z);
    }
    for i in 0..spec.untopical_items {
        let date = add_days(cal.start, (i * 11 % spec.days) as i64);
        let z = latent_dist.sample(&mut rng);
        push(&mut items, &mut rng, date, None, z);
    }

    let mut ohlc = Vec::new();
    let mut close = spec.start_close;
    for date in cal.days() {
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            continue;
        }
        let prev = close;
        let drive = latent.get(&add_days(date, -1)).copied().unwrap_or(0.0);
        close = prev + spec.effect * drive + noise.sample(&mut rng);
        let open = prev + noise.sample(&mut rng);
        let high = open.max(close) + noise.sample(&mut rng).abs();
        let low = open.min(close) - noise.sample(&mut rng).abs();
        let round = |v: f64| (v * 100.0).round() / 100.0;
        ohlc.push(OhlcRow {
            date,
            open: round(open),
            high: round(high),
            low: round(low),
            close: round(close),
        });
    }

    SignalFixture {
        spec: spec.clone(),
        items,
        scores,
        ohlc,
        latent,
    }
}

fn write_ohlc(rows: &[OhlcRow]) -> String {
    let mut out = String::from("Date,Open,High,Low,Close\n");
    for r in rows {
        out.push_str(&format!("{},{:.2},{:.2},{:.2},{:.2}\n", r.date, r.open, r.high, r.low, r.close));
    }
    out
}

fn config_doc(spec: &FixtureSpec, sentiment: serde_json::Value) -> String {
    let (train, exclude, test) = spec.split();
    let mut doc = json!({
        "corpus": "corpus.jsonl",
        "ohlc": "ohlc.csv",
        "topic_threshold": spec.topic_threshold(),
        "lags": [3, 5],
        "train": train.to_string(),
        "exclude": [exclude.to_string()],
        "test": test.to_string(),
        "out_dir": "out",
    });
    for (k, v) in sentiment.as_object().expect("object") {
        doc[k] = v.clone();
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("json");
    text.push('\n');
    text
}

/// Writes `corpus.jsonl`, `scores.jsonl`, `ohlc.csv`, `config.json`
/// (classifier scores) and `config_lexicon.json` (bundled lexicon) into
/// `dir`.
pub fn write_fixture(fixture: &SignalFixture, dir: impl AsRef<Path>) -> io::Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };

    let mut corpus = Vec::new();
    write_corpus(&mut corpus, &fixture.items)?;
    put("corpus.jsonl", corpus)?;

    let mut scores = String::new();
    for s in &fixture.scores {
        scores.push_str(&serde_json::to_string(s).map_err(io::Error::other)?);
        scores.push('\n');
    }
    put("scores.jsonl", scores.into_bytes())?;
    put("ohlc.csv", write_ohlc(&fixture.ohlc).into_bytes())?;
    put("config.json", config_doc(&fixture.spec, json!({ "scores": "scores.jsonl" })).into_bytes())?;
    put(
        "config_lexicon.json",
        config_doc(&fixture.spec, json!({ "lexicon": "bundled" })).into_bytes(),
    )?;
    Ok(written)
}
