//! Polite, resumable crawling of a dated news archive.
//!
//! One archive listing page is fetched per date; article links on it are
//! followed and stored. Every request to a host waits until `min_delay` has
//! elapsed since the previous request to that host, regardless of how many
//! workers are running.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{Datelike, NaiveDate};
use regex::Regex;
use scraper::Selector;
use sha2::{Digest, Sha256};
use url::Url;

use super::{extract_article, extract_links, read_corpus, CorpusError, NewsItem};
use crate::dates::{serial_day, DateRange};

/// Margin added on top of `min_delay` so that a fetcher reading its own clock
/// right after the grant still observes a full gap.
const DISPATCH_SLACK: Duration = Duration::from_millis(1);
const MAX_BACKOFF_DOUBLINGS: u32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct CrawlPolicy {
    pub min_delay: Duration,
    pub max_concurrent: usize,
    pub max_retries: u32,
    pub user_agent: String,
}

impl CrawlPolicy {
    pub const MIN_DELAY_FLOOR: Duration = Duration::from_millis(500);

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_delay < Self::MIN_DELAY_FLOOR {
            return Err(CorpusError::Policy(format!(
                "min_delay {} ms is below the {} ms floor",
                self.min_delay.as_millis(),
                Self::MIN_DELAY_FLOOR.as_millis()
            )));
        }
        if self.max_concurrent == 0 {
            return Err(CorpusError::Policy("max_concurrent must be positive".into()));
        }
        if self.user_agent.trim().is_empty() {
            return Err(CorpusError::Policy("user_agent must be set".into()));
        }
        Ok(())
    }

    fn backoff(&self, attempt: u32) -> Duration {
        self.min_delay * 2u32.pow(attempt.min(MAX_BACKOFF_DOUBLINGS))
    }
}

impl Default for CrawlPolicy {
    fn default() -> Self {
        CrawlPolicy {
            min_delay: Duration::from_millis(1000),
            max_concurrent: 1,
            max_retries: 3,
            user_agent: concat!("topicsent/", env!("CARGO_PKG_VERSION"), " (archive research crawler)")
                .to_string(),
        }
    }
}

/// Where archive pages live and how articles are recognised on them.
///
/// `archive_template` is resolved against the crawl base URL after
/// substituting `{date}` (YYYY-MM-DD), `{year}`, `{month}`, `{day}` and
/// `{serial}` (spreadsheet day number).
#[derive(Debug, Clone)]
pub struct ArchiveLayout {
    pub archive_template: String,
    pub article_pattern: Regex,
    pub container: Selector,
}

impl ArchiveLayout {
    pub fn new(
        archive_template: &str,
        article_pattern: &str,
        container_selector: &str,
    ) -> Result<Self, CorpusError> {
        let article_pattern =
            Regex::new(article_pattern).map_err(|e| CorpusError::Layout(e.to_string()))?;
        let container = Selector::parse(container_selector)
            .map_err(|e| CorpusError::Layout(format!("selector {container_selector:?}: {e:?}")))?;
        Ok(ArchiveLayout {
            archive_template: archive_template.to_string(),
            article_pattern,
            container,
        })
    }

    pub fn archive_url(&self, base: &Url, date: NaiveDate) -> Result<Url, CorpusError> {
        let path = self
            .archive_template
            .replace("{date}", &date.format("%Y-%m-%d").to_string())
            .replace("{year}", &date.year().to_string())
            .replace("{month}", &date.month().to_string())
            .replace("{day}", &date.day().to_string())
            .replace("{serial}", &serial_day(date).to_string());
        base.join(&path)
            .map_err(|e| CorpusError::Layout(format!("archive url {path:?}: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct FetchResponse {
    pub status: u16,
    pub body: String,
}

/// Issues a single GET. Transport failures are reported as `Err`; HTTP error
/// statuses come back as `Ok` with the status set.
pub trait Fetcher: Sync {
    fn fetch(&self, url: &Url) -> Result<FetchResponse, String>;
}

pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new(policy: &CrawlPolicy) -> Result<Self, CorpusError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(policy.user_agent.clone())
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| CorpusError::Client(e.to_string()))?;
        Ok(HttpFetcher { client })
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &Url) -> Result<FetchResponse, String> {
        let resp = self
            .client
            .get(url.clone())
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(FetchResponse { status, body })
    }
}

/// Enforces the per-host minimum gap between request dispatches.
pub struct HostThrottle {
    min_delay: Duration,
    hosts: Mutex<HashMap<String, Arc<Mutex<Option<Instant>>>>>,
}

impl HostThrottle {
    pub fn new(min_delay: Duration) -> Self {
        HostThrottle {
            min_delay,
            hosts: Mutex::new(HashMap::new()),
        }
    }

    /// Blocks until a request to `host` may be sent.
    pub fn acquire(&self, host: &str) {
        let slot = {
            let mut hosts = self.hosts.lock().expect("throttle poisoned");
            hosts.entry(host.to_string()).or_default().clone()
        };
        // holding the host slot while sleeping serialises workers per host
        let mut last = slot.lock().expect("throttle poisoned");
        if let Some(prev) = *last {
            let ready = prev + self.min_delay + DISPATCH_SLACK;
            let now = Instant::now();
            if ready > now {
                thread::sleep(ready - now);
            }
        }
        *last = Some(Instant::now());
    }
}

/// Append-only item store with a separate seen-URL index, so an interrupted
/// crawl can resume where it stopped.
///
/// Items go to `<path>` as corpus records; the index lives at `<path>.seen`
/// with one `article<TAB>url` or `page<TAB>url` entry per line.
pub struct CrawlStore {
    items_path: PathBuf,
    items_file: File,
    seen_file: File,
    seen_articles: HashSet<String>,
    done_pages: HashSet<String>,
    items: Vec<NewsItem>,
}

fn seen_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".seen");
    PathBuf::from(s)
}

/// Drops a trailing partial line left behind by an interrupted write.
fn truncate_partial_line(path: &Path) -> std::io::Result<()> {
    let data = match std::fs::read(path) {
        Ok(d) => d,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e),
    };
    if data.is_empty() || data.ends_with(b"\n") {
        return Ok(());
    }
    let keep = data.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let file = OpenOptions::new().write(true).open(path)?;
    file.set_len(keep as u64)?;
    Ok(())
}

fn open_append(path: &Path) -> Result<File, CorpusError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .read(true)
        .open(path)
        .map_err(|e| CorpusError::io(path, e))?;
    f.seek(SeekFrom::End(0)).map_err(|e| CorpusError::io(path, e))?;
    Ok(f)
}

impl CrawlStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let items_path = path.as_ref().to_path_buf();
        let index_path = seen_path(&items_path);
        for p in [&items_path, &index_path] {
            truncate_partial_line(p).map_err(|e| CorpusError::io(p, e))?;
        }

        let items = match File::open(&items_path) {
            Ok(f) => read_corpus(BufReader::new(f))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(CorpusError::io(&items_path, e)),
        };
        let mut seen_articles: HashSet<String> = items.iter().map(|i| i.url.clone()).collect();
        let mut done_pages = HashSet::new();
        if let Ok(f) = File::open(&index_path) {
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| CorpusError::io(&index_path, e))?;
                match line.split_once('\t') {
                    Some(("article", url)) => {
                        seen_articles.insert(url.to_string());
                    }
                    Some(("page", url)) => {
                        done_pages.insert(url.to_string());
                    }
                    _ => log::warn!("{}: ignoring index line {line:?}", index_path.display()),
                }
            }
        }
        Ok(CrawlStore {
            items_file: open_append(&items_path)?,
            seen_file: open_append(&index_path)?,
            items_path,
            seen_articles,
            done_pages,
            items,
        })
    }

    pub fn items(&self) -> &[NewsItem] {
        &self.items
    }

    pub fn path(&self) -> &Path {
        &self.items_path
    }

    pub fn is_seen(&self, url: &str) -> bool {
        self.seen_articles.contains(url)
    }

    pub fn is_page_done(&self, url: &str) -> bool {
        self.done_pages.contains(url)
    }

    fn record_item(&mut self, item: NewsItem) -> Result<(), CorpusError> {
        if !self.seen_articles.insert(item.url.clone()) {
            return Ok(());
        }
        let mut line = serde_json::to_string(&item).expect("item serialises");
        line.push('\n');
        self.items_file
            .write_all(line.as_bytes())
            .and_then(|_| self.items_file.flush())
            .map_err(|e| CorpusError::io(&self.items_path, e))?;
        self.append_index("article", &item.url)?;
        self.items.push(item);
        Ok(())
    }

    fn mark_page_done(&mut self, url: &str) -> Result<(), CorpusError> {
        if self.done_pages.insert(url.to_string()) {
            self.append_index("page", url)?;
        }
        Ok(())
    }

    fn append_index(&mut self, kind: &str, url: &str) -> Result<(), CorpusError> {
        writeln!(self.seen_file, "{kind}\t{url}")
            .and_then(|_| self.seen_file.flush())
            .map_err(|e| CorpusError::io(&seen_path(&self.items_path), e))
    }
}

#[derive(Debug, Default, Clone)]
pub struct CrawlSummary {
    pub pages_fetched: usize,
    pub pages_resumed: usize,
    pub pages_failed: usize,
    pub articles_fetched: usize,
    pub articles_failed: usize,
    pub links_already_seen: usize,
    /// Everything in the store after the crawl, including earlier sessions.
    pub items: Vec<NewsItem>,
}

pub fn article_id(url: &str) -> String {
    let digest = Sha256::digest(url.as_bytes());
    hex::encode(&digest[..8])
}

struct Session<'a, F: Fetcher> {
    policy: &'a CrawlPolicy,
    layout: &'a ArchiveLayout,
    fetcher: &'a F,
    throttle: HostThrottle,
}

impl<F: Fetcher> Session<'_, F> {
    fn fetch_with_retry(&self, url: &Url) -> Result<String, String> {
        let host = url.host_str().unwrap_or_default().to_string();
        let mut attempt = 0;
        loop {
            self.throttle.acquire(&host);
            let failure = match self.fetcher.fetch(url) {
                Ok(r) if (200..300).contains(&r.status) => return Ok(r.body),
                Ok(r) if r.status == 429 || r.status >= 500 => format!("HTTP {}", r.status),
                Ok(r) => return Err(format!("HTTP {}", r.status)),
                Err(e) => e,
            };
            if attempt >= self.policy.max_retries {
                return Err(format!("{failure} after {} attempts", attempt + 1));
            }
            let wait = self.policy.backoff(attempt);
            log::debug!("{url}: {failure}, retrying in {} ms", wait.as_millis());
            thread::sleep(wait);
            attempt += 1;
        }
    }

    fn fetch_articles(
        &self,
        date: NaiveDate,
        links: &[Url],
        store: &Mutex<&mut CrawlStore>,
        summary: &Mutex<CrawlSummary>,
    ) -> Result<(), CorpusError> {
        let next = AtomicUsize::new(0);
        let first_error: Mutex<Option<CorpusError>> = Mutex::new(None);
        let workers = self.policy.max_concurrent.min(links.len()).max(1);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(url) = links.get(i) else { break };
                    match self.fetch_with_retry(url) {
                        Ok(html) => {
                            let (headline, body) = extract_article(&html, &self.layout.container);
                            let item = NewsItem {
                                id: article_id(url.as_str()),
                                date,
                                url: url.to_string(),
                                headline,
                                body,
                                topic: None,
                            };
                            let res = store.lock().expect("store poisoned").record_item(item);
                            match res {
                                Ok(()) => summary.lock().expect("poisoned").articles_fetched += 1,
                                Err(e) => {
                                    first_error.lock().expect("poisoned").get_or_insert(e);
                                    break;
                                }
                            }
                        }
                        Err(reason) => {
                            log::warn!("skipping article {url}: {reason}");
                            summary.lock().expect("poisoned").articles_failed += 1;
                        }
                    }
                });
            }
        });
        match first_error.into_inner().expect("poisoned") {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Crawls one archive page per date in `dates` and every new article linked
/// from it.
///
/// Network failures that survive `max_retries` skip the page or article (it
/// is logged and retried on the next run); HTTP 429 and 5xx responses back
/// off exponentially before retrying. Pages whose articles were all handled
/// in an earlier session are not requested again.
pub fn crawl_archive<F: Fetcher>(
    base_url: &Url,
    dates: DateRange,
    policy: &CrawlPolicy,
    layout: &ArchiveLayout,
    fetcher: &F,
    store: &mut CrawlStore,
) -> Result<CrawlSummary, CorpusError> {
    if dates.is_empty() {
        return Err(CorpusError::EmptyDateRange {
            start: dates.start,
            end: dates.end,
        });
    }
    policy.validate()?;
    let session = Session {
        policy,
        layout,
        fetcher,
        throttle: HostThrottle::new(policy.min_delay),
    };
    let summary = Mutex::new(CrawlSummary::default());

    for date in dates.days() {
        let page = layout.archive_url(base_url, date)?;
        if store.is_page_done(page.as_str()) {
            summary.lock().expect("poisoned").pages_resumed += 1;
            continue;
        }
        let html = match session.fetch_with_retry(&page) {
            Ok(html) => html,
            Err(reason) => {
                log::warn!("skipping archive page {page}: {reason}");
                summary.lock().expect("poisoned").pages_failed += 1;
                continue;
            }
        };
        summary.lock().expect("poisoned").pages_fetched += 1;

        let links = extract_links(&html, &page, &layout.article_pattern);
        let (fresh, old): (Vec<Url>, Vec<Url>) =
            links.into_iter().partition(|u| !store.is_seen(u.as_str()));
        summary.lock().expect("poisoned").links_already_seen += old.len();

        let failed_before = summary.lock().expect("poisoned").articles_failed;
        {
            let shared = Mutex::new(&mut *store);
            session.fetch_articles(date, &fresh, &shared, &summary)?;
        }
        if summary.lock().expect("poisoned").articles_failed == failed_before {
            store.mark_page_done(page.as_str())?;
        }
        log::info!("{date}: {} new article links", fresh.len());
    }

    let mut summary = summary.into_inner().expect("poisoned");
    summary.items = store.items().to_vec();
    Ok(summary)
}
