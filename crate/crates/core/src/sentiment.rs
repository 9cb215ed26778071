//! Per-item sentiment scores.
//!
//! Two sources are supported: a word-valence lexicon applied to article
//! bodies, and binary classifier outputs (label plus predicted-class
//! probability) supplied in a line-delimited file and converted to log-odds.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::NewsItem;

/// Smoothing constant of the compound score.
pub const DEFAULT_ALPHA: f64 = 15.0;
/// Probability clamp used before taking log-odds.
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const MAX_VALENCE: f64 = 4.0;

const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.tsv");

/// Scalar applied to a valence preceded by a negator (negation heuristic only).
const NEGATION_SCALAR: f64 = -0.74;
const NEGATION_WINDOW: usize = 3;
const NEGATORS: &[&str] = &[
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "cannot", "without",
    "hardly", "barely",
];

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("probability {prob} for {id:?} outside [0.5, 1]")]
    ProbabilityOutOfRange { id: String, prob: f64 },
    #[error("epsilon must lie in (0, 0.5), got {0}")]
    BadEpsilon(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
}

impl Lexicon {
    pub fn new<I, S>(entries: I) -> Result<Self, SentimentError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut map = HashMap::new();
        for (i, (word, valence)) in entries.into_iter().enumerate() {
            check_valence(valence).map_err(|message| SentimentError::Malformed {
                line: i + 1,
                message,
            })?;
            map.insert(word.as_ref().to_lowercase(), valence);
        }
        Ok(Lexicon { entries: map })
    }

    /// Parses `word<TAB>valence` lines. Extra tab-separated columns are
    /// ignored, so lexicons that carry rating statistics load unchanged.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self, SentimentError> {
        let mut entries = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| SentimentError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut cols = trimmed.split('\t');
            let word = cols.next().unwrap_or_default().trim();
            let raw = cols.next().ok_or_else(|| SentimentError::Malformed {
                line: line_no,
                message: "expected word<TAB>valence".into(),
            })?;
            let valence: f64 = raw.trim().parse().map_err(|_| SentimentError::Malformed {
                line: line_no,
                message: format!("valence {raw:?} is not a number"),
            })?;
            check_valence(valence).map_err(|message| SentimentError::Malformed {
                line: line_no,
                message,
            })?;
            if word.is_empty() {
                return Err(SentimentError::Malformed {
                    line: line_no,
                    message: "empty word".into(),
                });
            }
            entries.insert(word.to_lowercase(), valence);
        }
        Ok(Lexicon { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SentimentError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| SentimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_tsv(BufReader::new(file))
    }

    /// The small finance/news lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_tsv(BUNDLED_LEXICON.as_bytes()).expect("bundled lexicon is valid")
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED_LEXICON
    }

    pub fn valence(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by word.
    pub fn sorted_entries(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}

fn check_valence(v: f64) -> Result<(), String> {
    if v.is_finite() && (-MAX_VALENCE..=MAX_VALENCE).contains(&v) {
        Ok(())
    } else {
        Err(format!("valence {v} outside [-4, 4]"))
    }
}

/// Splits on runs of non-alphanumeric characters and lowercases.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sum of token valences; tokens missing from the lexicon contribute 0.
pub fn valence_sum<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon, negation: bool) -> f64 {
    let mut sum = 0.0;
    for (i, tok) in tokens.iter().enumerate() {
        let Some(mut v) = lexicon.valence(tok.as_ref()) else {
            continue;
        };
        if negation {
            let from = i.saturating_sub(NEGATION_WINDOW);
            if tokens[from..i].iter().any(|t| NEGATORS.contains(&t.as_ref())) {
                v *= NEGATION_SCALAR;
            }
        }
        sum += v;
    }
    sum
}

/// Maps a valence sum `s` to `s / sqrt(s^2 + alpha)`, which lies in (-1, 1).
pub fn compound(sum: f64, alpha: f64) -> f64 {
    let value = sum / (sum * sum + alpha).sqrt();
    // saturates to ±1 in f64 only for |sum| beyond ~1e8
    let below_one = f64::from_bits(1.0f64.to_bits() - 1);
    value.clamp(-below_one, below_one)
}

pub fn score_text_lexicon(text: &str, lexicon: &Lexicon, alpha: f64) -> Result<f64, SentimentError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(SentimentError::BadAlpha(alpha));
    }
    Ok(compound(valence_sum(&tokenize(text), lexicon, false), alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Positive,
    Negative,
}

/// One classifier prediction: the predicted label and its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierOutput {
    pub id: String,
    pub label: Label,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScoreSource {
    Lexicon,
    Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub id: String,
    pub value: f64,
    pub source: ScoreSource,
}

/// Signed base-10 log-odds of the predicted class.
pub fn prob_to_score(out: &ClassifierOutput, epsilon: f64) -> Result<SentimentScore, SentimentError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(SentimentError::BadEpsilon(epsilon));
    }
    if !(0.5..=1.0).contains(&out.prob) {
        return Err(SentimentError::ProbabilityOutOfRange {
            id: out.id.clone(),
            prob: out.prob,
        });
    }
    let p = out.prob.min(1.0 - epsilon);
    let magnitude = (p / (1.0 - p)).log10();
    let value = match out.label {
        Label::Positive => magnitude,
        Label::Negative => -magnitude,
    };
    Ok(SentimentScore {
        id: out.id.clone(),
        value,
        source: ScoreSource::Classifier,
    })
}

/// Reads `{"id","label","prob"}` records; a repeated id replaces the
/// earlier record.
pub fn read_external_scores<R: BufRead>(
    reader: R,
) -> Result<BTreeMap<String, ClassifierOutput>, SentimentError> {
    let mut out = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| SentimentError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ClassifierOutput =
            serde_json::from_str(&line).map_err(|e| SentimentError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if !(0.5..=1.0).contains(&rec.prob) {
            return Err(SentimentError::Malformed {
                line: line_no,
                message: format!("prob {} outside [0.5, 1]", rec.prob),
            });
        }
        if let Some(prev) = out.insert(rec.id.clone(), rec) {
            log::warn!("line {line_no}: duplicate score id {:?}, keeping the later record", prev.id);
        }
    }
    Ok(out)
}

pub fn load_external_scores(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, ClassifierOutput>, SentimentError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| SentimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_external_scores(BufReader::new(file))
}

pub enum SentimentEngine {
    /// Scores article bodies.
    Lexicon {
        lexicon: Lexicon,
        alpha: f64,
        negation: bool,
    },
    /// Converts precomputed classifier outputs, looked up by item id.
    External {
        outputs: BTreeMap<String, ClassifierOutput>,
        epsilon: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredItems {
    pub scores: Vec<SentimentScore>,
    /// Items with no classifier output.
    pub missing: usize,
}

pub fn score_items(items: &[NewsItem], engine: &SentimentEngine) -> Result<ScoredItems, SentimentError> {
    let mut out = ScoredItems::default();
    match engine {
        SentimentEngine::Lexicon {
            lexicon,
            alpha,
            negation,
        } => {
            if !(*alpha > 0.0 && alpha.is_finite()) {
                return Err(SentimentError::BadAlpha(*alpha));
            }
            for item in items {
                let sum = valence_sum(&tokenize(&item.body), lexicon, *negation);
                out.scores.push(SentimentScore {
                    id: item.id.clone(),
                    value: compound(sum, *alpha),
                    source: ScoreSource::Lexicon,
                });
            }
        }
        SentimentEngine::External { outputs, epsilon } => {
            for item in items {
                match outputs.get(&item.id) {
                    Some(o) => out.scores.push(prob_to_score(o, *epsilon)?),
                    None => out.missing += 1,
                }
            }
            if out.missing > 0 {
                log::warn!("{} items have no classifier score", out.missing);
            }
        }
    }
    Ok(out)
}
