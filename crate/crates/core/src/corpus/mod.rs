//! News corpus records and the line-delimited corpus file format.
//!
//! A corpus file holds one JSON object per line with the fields
//! `id`, `date` (`YYYY-MM-DD`), `url`, `headline` and `body`. An optional
//! `topic` field is accepted and preserved but is re-derived downstream.

mod crawl;
mod extract;

pub use crawl::{
    article_id, crawl_archive, ArchiveLayout, CrawlPolicy, CrawlStore, CrawlSummary, FetchResponse, Fetcher,
    HostThrottle, HttpFetcher,
};
pub use extract::{extract_article, extract_links};

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("empty date range: {start} is after {end}")]
    EmptyDateRange { start: NaiveDate, end: NaiveDate },
    #[error("invalid crawl policy: {0}")]
    Policy(String),
    #[error("invalid archive layout: {0}")]
    Layout(String),
    #[error("http client: {0}")]
    Client(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One dated news article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsItem {
    pub id: String,
    pub date: NaiveDate,
    pub url: String,
    pub headline: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
}

impl NewsItem {
    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.url.is_empty() {
            return Err("empty url".into());
        }
        Ok(())
    }
}

/// Reads a corpus from a line-delimited reader, keeping the first record for
/// every id. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<NewsItem>, CorpusError> {
    let mut seen = HashSet::new();
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item: NewsItem = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        item.validate().map_err(|message| CorpusError::Malformed {
            line: line_no,
            message,
        })?;
        if seen.insert(item.id.clone()) {
            items.push(item);
        } else {
            log::debug!("line {line_no}: duplicate id {} dropped", item.id);
        }
    }
    Ok(items)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<NewsItem>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_corpus(BufReader::new(file))
}

pub fn write_corpus<W: Write>(mut writer: W, items: &[NewsItem]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_corpus(path: impl AsRef<Path>, items: &[NewsItem]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_corpus(BufWriter::new(file), items).map_err(|e| CorpusError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, date: &str) -> String {
        format!(
            r#"{{"id":"{id}","date":"{date}","url":"https://example.com/news/x/{id}.cms","headline":"h {id}","body":"b"}}"#
        )
    }

    #[test]
    fn two_lines_in_order() {
        let text = format!("{}\n{}\n", line("2", "2021-01-02"), line("1", "2021-01-01"));
        let items = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].id, "2");
        assert_eq!(items[1].id, "1");
        assert_eq!(items[1].date, NaiveDate::from_ymd_opt(2021, 1, 1).unwrap());
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(read_corpus(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_keeps_first() {
        let text = format!("{}\n{}\n", line("7", "2021-01-02"), line("7", "2021-03-01"));
        let items = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].date.to_string(), "2021-01-02");
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = format!("{}\n{{\"id\": 3}}\n", line("1", "2021-01-01"));
        match read_corpus(text.as_bytes()) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_date_rejected() {
        let text = line("1", "2021-02-30");
        assert!(matches!(
            read_corpus(text.as_bytes()),
            Err(CorpusError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn empty_url_rejected() {
        let text = r#"{"id":"1","date":"2021-01-01","url":"","headline":"","body":""}"#;
        assert!(read_corpus(text.as_bytes()).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_corpus("/nonexistent/corpus.jsonl"),
            Err(CorpusError::Io { .. })
        ));
    }
}
