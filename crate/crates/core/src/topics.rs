//! Topics derived from article URL paths, with a frequency cut-off.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::corpus::NewsItem;

pub const DEFAULT_THRESHOLD: usize = 200;

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("cannot parse url {url:?}: {reason}")]
    BadUrl { url: String, reason: String },
    #[error("topic threshold must be positive")]
    ZeroThreshold,
    #[error("catalog export: {0}")]
    Io(#[from] std::io::Error),
}

/// Which path segment names the topic, plus optional aliases applied after
/// normalisation (e.g. `markets` → `market`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicRule {
    /// Zero-based index into the non-empty path segments.
    pub segment_index: usize,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

impl Default for TopicRule {
    fn default() -> Self {
        TopicRule {
            segment_index: 1,
            aliases: BTreeMap::new(),
        }
    }
}

/// Lowercases and turns every run of separator characters into one `_`.
pub fn normalize_topic(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for c in raw.chars() {
        if c.is_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.extend(c.to_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

/// Topic named by the configured path segment of `url`.
///
/// The topic segment must be a directory, i.e. be followed by at least one
/// more segment; the final segment is the document itself. Returns
/// `Ok(None)` when the URL has no such segment.
pub fn extract_topic(url: &str, rule: &TopicRule) -> Result<Option<String>, TopicError> {
    let parsed = Url::parse(url).map_err(|e| TopicError::BadUrl {
        url: url.to_string(),
        reason: e.to_string(),
    })?;
    if parsed.cannot_be_a_base() || parsed.host_str().is_none() {
        return Err(TopicError::BadUrl {
            url: url.to_string(),
            reason: "not an absolute hierarchical url".into(),
        });
    }
    let segments: Vec<&str> = parsed
        .path_segments()
        .map(|s| s.filter(|seg| !seg.is_empty()).collect())
        .unwrap_or_default();
    if rule.segment_index + 1 >= segments.len() {
        return Ok(None);
    }
    let topic = normalize_topic(segments[rule.segment_index]);
    if topic.is_empty() {
        return Ok(None);
    }
    Ok(Some(rule.aliases.get(&topic).cloned().unwrap_or(topic)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCatalog {
    pub entries: BTreeMap<String, usize>,
    pub threshold: usize,
    /// Topics with `count >= threshold`, sorted by name.
    pub retained: Vec<String>,
    pub rule: TopicRule,
    pub items_without_topic: usize,
    pub unparseable_urls: usize,
}

impl TopicCatalog {
    pub fn is_retained(&self, topic: &str) -> bool {
        self.retained.binary_search_by(|t| t.as_str().cmp(topic)).is_ok()
    }

    /// Writes `topic,count,retained` rows, most frequent first.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TopicError> {
        let mut rows: Vec<_> = self.entries.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["topic", "count", "retained"])
            .map_err(csv_io)?;
        for (topic, count) in rows {
            w.write_record([
                topic.as_str(),
                &count.to_string(),
                if *count >= self.threshold { "true" } else { "false" },
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> TopicError {
    TopicError::Io(std::io::Error::other(e))
}

pub fn build_catalog(
    items: &[NewsItem],
    threshold: usize,
    rule: &TopicRule,
) -> Result<TopicCatalog, TopicError> {
    if threshold == 0 {
        return Err(TopicError::ZeroThreshold);
    }
    let mut entries: BTreeMap<String, usize> = BTreeMap::new();
    let mut items_without_topic = 0;
    let mut unparseable_urls = 0;
    for item in items {
        match extract_topic(&item.url, rule) {
            Ok(Some(topic)) => *entries.entry(topic).or_default() += 1,
            Ok(None) => items_without_topic += 1,
            Err(e) => {
                log::debug!("item {}: {e}", item.id);
                unparseable_urls += 1;
            }
        }
    }
    let retained: Vec<String> = entries
        .iter()
        .filter(|(_, &count)| count >= threshold)
        .map(|(topic, _)| topic.clone())
        .collect();
    if retained.is_empty() {
        log::warn!(
            "no topic reaches the frequency threshold {threshold} ({} raw topics)",
            entries.len()
        );
    }
    Ok(TopicCatalog {
        entries,
        threshold,
        retained,
        rule: rule.clone(),
        items_without_topic,
        unparseable_urls,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopicAssignment {
    /// Items whose topic is retained, with `topic` set, in input order.
    pub items: Vec<NewsItem>,
    pub below_threshold: usize,
    pub without_topic: usize,
}

pub fn assign_topics(items: &[NewsItem], catalog: &TopicCatalog) -> TopicAssignment {
    let mut out = TopicAssignment::default();
    for item in items {
        match extract_topic(&item.url, &catalog.rule) {
            Ok(Some(topic)) if catalog.is_retained(&topic) => {
                let mut item = item.clone();
                item.topic = Some(topic);
                out.items.push(item);
            }
            Ok(Some(_)) => out.below_threshold += 1,
            Ok(None) | Err(_) => out.without_topic += 1,
        }
    }
    out
}
