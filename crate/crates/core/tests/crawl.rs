use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use url::Url;

use topicsent::corpus::{crawl_archive, ArchiveLayout, CrawlPolicy, CrawlStore, FetchResponse, Fetcher, HttpFetcher};
use topicsent::DateRange;

const BASE: &str = "https://archive.test/";

/// Serves canned pages and records when each request arrived.
struct MockSite {
    pages: HashMap<String, (u16, String)>,
    /// Statuses returned before the canned page, per URL.
    failures: Mutex<HashMap<String, Vec<u16>>>,
    log: Mutex<Vec<(Instant, String)>>,
}

impl MockSite {
    fn new() -> Self {
        MockSite {
            pages: HashMap::new(),
            failures: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    fn page(mut self, path: &str, status: u16, body: &str) -> Self {
        self.pages.insert(format!("{BASE}{path}"), (status, body.to_string()));
        self
    }

    fn fail_first(self, path: &str, statuses: &[u16]) -> Self {
        self.failures
            .lock()
            .unwrap()
            .insert(format!("{BASE}{path}"), statuses.iter().rev().copied().collect());
        self
    }

    fn requests(&self) -> Vec<(Instant, String)> {
        self.log.lock().unwrap().clone()
    }
}

impl Fetcher for MockSite {
    fn fetch(&self, url: &Url) -> Result<FetchResponse, String> {
        self.log.lock().unwrap().push((Instant::now(), url.to_string()));
        if let Some(status) = self.failures.lock().unwrap().get_mut(url.as_str()).and_then(Vec::pop) {
            return Ok(FetchResponse {
                status,
                body: String::new(),
            });
        }
        match self.pages.get(url.as_str()) {
            Some((status, body)) => Ok(FetchResponse {
                status: *status,
                body: body.clone(),
            }),
            None => Ok(FetchResponse {
                status: 404,
                body: String::new(),
            }),
        }
    }
}

fn listing(links: &[&str]) -> String {
    let anchors: String = links.iter().map(|l| format!("<a href=\"{l}\">x</a>")).collect();
    format!("<html><body><nav><a href=\"/about\">about</a></nav>{anchors}</body></html>")
}

fn article(title: &str) -> String {
    format!("<html><body><article><h1>{title}</h1><p>Markets rose.</p><script>x()</script></article></body></html>")
}

fn layout() -> ArchiveLayout {
    ArchiveLayout::new("archive/{date}.html", "/news/", "article").unwrap()
}

fn policy(ms: u64, concurrent: usize) -> CrawlPolicy {
    CrawlPolicy {
        min_delay: Duration::from_millis(ms),
        max_concurrent: concurrent,
        max_retries: 2,
        ..CrawlPolicy::default()
    }
}

fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 3, d).unwrap()
}

fn assert_gaps(requests: &[(Instant, String)], min: Duration) {
    let mut times: Vec<Instant> = requests.iter().map(|r| r.0).collect();
    times.sort();
    for w in times.windows(2) {
        assert!(w[1] - w[0] >= min, "gap {:?} below {min:?}", w[1] - w[0]);
    }
}

#[test]
fn three_requests_span_two_delays() {
    let site = MockSite::new()
        .page("archive/2021-03-01.html", 200, &listing(&["/news/a/1.cms", "/news/b/2.cms"]))
        .page("news/a/1.cms", 200, &article("One"))
        .page("news/b/2.cms", 200, &article("Two"));
    let dir = tempfile::tempdir().unwrap();
    let mut store = CrawlStore::open(dir.path().join("items.jsonl")).unwrap();
    let start = Instant::now();
    let summary = crawl_archive(
        &Url::parse(BASE).unwrap(),
        DateRange::new(day(1), day(1)),
        &policy(1000, 1),
        &layout(),
        &site,
        &mut store,
    )
    .unwrap();
    assert!(start.elapsed() >= Duration::from_millis(2000));
    assert_eq!(site.requests().len(), 3);
    assert_eq!(summary.items.len(), 2);
    assert_eq!(summary.items[0].headline, "One");
    assert_eq!(summary.items[0].body, "Markets rose.");
    assert_eq!(summary.items[0].date, day(1));
}

#[test]
fn concurrent_workers_still_respect_host_gap() {
    let links: Vec<String> = (0..4).map(|i| format!("/news/t/{i}.cms")).collect();
    let refs: Vec<&str> = links.iter().map(String::as_str).collect();
    let mut site = MockSite::new().page("archive/2021-03-01.html", 200, &listing(&refs));
    for l in &links {
        site = site.page(&l[1..], 200, &article(l));
    }
    let dir = tempfile::tempdir().unwrap();
    let mut store = CrawlStore::open(dir.path().join("items.jsonl")).unwrap();
    let summary = crawl_archive(
        &Url::parse(BASE).unwrap(),
        DateRange::new(day(1), day(1)),
        &policy(500, 3),
        &layout(),
        &site,
        &mut store,
    )
    .unwrap();
    assert_eq!(summary.articles_fetched, 4);
    assert_gaps(&site.requests(), Duration::from_millis(500));
}

#[test]
fn article_linked_twice_is_stored_once() {
    let site = MockSite::new()
        .page("archive/2021-03-01.html", 200, &listing(&["/news/a/1.cms", "/news/a/shared.cms"]))
        .page("archive/2021-03-02.html", 200, &listing(&["/news/a/shared.cms#top", "/news/b/2.cms"]))
        .page("news/a/1.cms", 200, &article("One"))
        .page("news/a/shared.cms", 200, &article("Shared"))
        .page("news/b/2.cms", 200, &article("Two"));
    let dir = tempfile::tempdir().unwrap();
    let mut store = CrawlStore::open(dir.path().join("items.jsonl")).unwrap();
    let summary = crawl_archive(
        &Url::parse(BASE).unwrap(),
        DateRange::new(day(1), day(2)),
        &policy(500, 1),
        &layout(),
        &site,
        &mut store,
    )
    .unwrap();
    assert_eq!(summary.items.len(), 3);
    assert_eq!(summary.links_already_seen, 1);
    let mut ids: Vec<&str> = summary.items.iter().map(|i| i.id.as_str()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 3);
    let shared_fetches = site.requests().iter().filter(|r| r.1.contains("shared")).count();
    assert_eq!(shared_fetches, 1);
}

#[test]
fn reversed_range_issues_no_requests() {
    let site = MockSite::new();
    let dir = tempfile::tempdir().unwrap();
    let mut store = CrawlStore::open(dir.path().join("items.jsonl")).unwrap();
    let res = crawl_archive(
        &Url::parse(BASE).unwrap(),
        DateRange::new(day(2), day(1)),
        &policy(500, 1),
        &layout(),
        &site,
        &mut store,
    );
    assert!(res.is_err());
    assert!(site.requests().is_empty());
}

#[test]
fn server_errors_back_off_then_succeed() {
    let site = MockSite::new()
        .page("archive/2021-03-01.html", 200, &listing(&["/news/a/1.cms"]))
        .page("news/a/1.cms", 200, &article("One"))
        .fail_first("news/a/1.cms", &[503, 429]);
    let dir = tempfile::tempdir().unwrap();
    let mut store = CrawlStore::open(dir.path().join("items.jsonl")).unwrap();
    let summary = crawl_archive(
        &Url::parse(BASE).unwrap(),
        DateRange::new(day(1), day(1)),
        &policy(500, 1),
        &layout(),
        &site,
        &mut store,
    )
    .unwrap();
    assert_eq!(summary.articles_fetched, 1);
    let reqs = site.requests();
    assert_eq!(reqs.len(), 4);
    // backoff after the first failure is min_delay, after the second 2·min_delay
    assert!(reqs[2].0 - reqs[1].0 >= Duration::from_millis(500));
    assert!(reqs[3].0 - reqs[2].0 >= Duration::from_millis(1000));
}

#[test]
fn persistent_failure_skips_item_and_resume_picks_it_up() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("items.jsonl");
    let base = Url::parse(BASE).unwrap();
    let range = DateRange::new(day(1), day(2));
    let p1 = listing(&["/news/a/1.cms", "/news/a/2.cms"]);
    let p2 = listing(&["/news/b/3.cms"]);

    let broken = MockSite::new()
        .page("archive/2021-03-01.html", 200, &p1)
        .page("archive/2021-03-02.html", 200, &p2)
        .page("news/a/1.cms", 200, &article("One"))
        .page("news/a/2.cms", 404, "")
        .page("news/b/3.cms", 200, &article("Three"));
    {
        let mut store = CrawlStore::open(&path).unwrap();
        let s = crawl_archive(&base, range, &policy(500, 1), &layout(), &broken, &mut store).unwrap();
        assert_eq!(s.articles_fetched, 2);
        assert_eq!(s.articles_failed, 1);
    }

    let fixed = MockSite::new()
        .page("archive/2021-03-01.html", 200, &p1)
        .page("archive/2021-03-02.html", 200, &p2)
        .page("news/a/1.cms", 200, &article("One"))
        .page("news/a/2.cms", 200, &article("Two"))
        .page("news/b/3.cms", 200, &article("Three"));
    let mut store = CrawlStore::open(&path).unwrap();
    let s = crawl_archive(&base, range, &policy(500, 1), &layout(), &fixed, &mut store).unwrap();
    // the complete page is not requested again; the incomplete one is, and
    // only its missing article is fetched
    let urls: Vec<String> = fixed.requests().into_iter().map(|r| r.1).collect();
    assert_eq!(
        urls,
        vec![format!("{BASE}archive/2021-03-01.html"), format!("{BASE}news/a/2.cms")]
    );
    assert_eq!(s.pages_resumed, 1);
    assert_eq!(s.items.len(), 3);
    let headlines: Vec<&str> = s.items.iter().map(|i| i.headline.as_str()).collect();
    assert_eq!(headlines, ["One", "Three", "Two"]);
}

/// A one-connection-at-a-time HTTP server over a local socket.
fn serve(routes: HashMap<String, String>) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let expected = routes.len();
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for stream in listener.incoming().take(expected) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut agent = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.to_ascii_lowercase().starts_with("user-agent:") {
                    agent = line[11..].trim().to_string();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
            let (status, body) = match routes.get(&path) {
                Some(b) => ("200 OK", b.clone()),
                None => ("404 Not Found", String::new()),
            };
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: text/html\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            seen.push(format!("{path} {agent}"));
        }
        seen
    });
    (format!("http://{addr}/"), handle)
}

#[test]
fn http_fetcher_against_local_server() {
    let routes = HashMap::from([
        ("/archive/2021-03-01.html".to_string(), listing(&["/news/markets/9.cms"])),
        ("/news/markets/9.cms".to_string(), article("Local")),
    ]);
    let (base, server) = serve(routes);
    let dir = tempfile::tempdir().unwrap();
    let mut store = CrawlStore::open(dir.path().join("items.jsonl")).unwrap();
    let pol = policy(500, 1);
    let fetcher = HttpFetcher::new(&pol).unwrap();
    let summary = crawl_archive(
        &Url::parse(&base).unwrap(),
        DateRange::new(day(1), day(1)),
        &pol,
        &layout(),
        &fetcher,
        &mut store,
    )
    .unwrap();
    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 2);
    assert!(seen.iter().all(|s| s.contains(&pol.user_agent)));
    assert_eq!(summary.items.len(), 1);
    assert_eq!(summary.items[0].headline, "Local");
    assert_eq!(summary.items[0].url, format!("{base}news/markets/9.cms"));

    let reloaded = topicsent::corpus::load_corpus(dir.path().join("items.jsonl")).unwrap();
    assert_eq!(reloaded, summary.items);
}
