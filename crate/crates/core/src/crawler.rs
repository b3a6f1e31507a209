//! Bounded website mirroring with stable, query-preserving file names.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, LazyLock};
use std::time::{Duration, Instant};

use globset::{Glob, GlobMatcher};
use regex::Regex;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, Semaphore};
use url::Url;

use crate::fsutil::{self, sha256_hex};

pub const REPORT_FILE: &str = "crawl_report.json";

#[derive(Debug, thiserror::Error)]
pub enum CrawlError {
    #[error("not an absolute http(s) URL: {0:?}")]
    BadUrl(String),
    #[error("invalid crawl manifest: {0}")]
    Manifest(String),
    #[error("bad pattern {pattern:?}: {reason}")]
    Pattern { pattern: String, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CrawlError + '_ {
    move |source| CrawlError::Io { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------------------
// URL to path mapping

/// Characters that cannot appear in a file name on common filesystems.
fn needs_escape(c: char) -> bool {
    c.is_control() || matches!(c, '\\' | ':' | '*' | '"' | '<' | '>' | '|' | '?' | '/')
}

fn escape_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if needs_escape(c) {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                out.push_str(&format!("%{b:02X}"));
            }
        } else {
            out.push(c);
        }
    }
    match out.as_str() {
        "" => "_".into(),
        "." => "%2E".into(),
        ".." => "%2E%2E".into(),
        _ => out,
    }
}

fn parse_http_url(input: &str) -> Result<Url, CrawlError> {
    let url = Url::parse(input).map_err(|_| CrawlError::BadUrl(input.into()))?;
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
        return Err(CrawlError::BadUrl(input.into()));
    }
    Ok(url)
}

/// Maps a URL to its mirror path: host directory, one directory per path
/// segment, `index.html` for an empty final segment. The query string is
/// appended to the file name after a `_`; inside it `&` and `=` stay literal
/// while characters that are illegal in file names (including any further
/// `?`) are percent-encoded.
pub fn sanitize_url_to_path(url: &str) -> Result<PathBuf, CrawlError> {
    Ok(url_path(&parse_http_url(url)?))
}

pub fn url_path(url: &Url) -> PathBuf {
    let mut host = url.host_str().unwrap_or("unknown-host").to_string();
    if let Some(port) = url.port() {
        host.push_str(&format!(":{port}"));
    }
    let mut path = PathBuf::from(escape_component(&host));
    let segments: Vec<&str> = url.path_segments().map(|s| s.collect()).unwrap_or_default();
    let (last, dirs) = segments.split_last().map(|(l, d)| (*l, d)).unwrap_or(("", &[]));
    for dir in dirs {
        path.push(escape_component(dir));
    }
    let mut file = if last.is_empty() { "index.html".to_string() } else { last.to_string() };
    if let Some(query) = url.query() {
        file.push('_');
        file.push_str(query);
    }
    path.push(escape_component(&file));
    path
}

/// True when `path` is relative and has no `.`/`..` components.
pub fn is_contained(path: &Path) -> bool {
    path.components().all(|c| matches!(c, Component::Normal(_)))
}

// ---------------------------------------------------------------------------
// Patterns

/// A URL or file-name pattern: a glob by default, a regex with a `re:` prefix.
#[derive(Debug, Clone)]
pub enum Pattern {
    Glob(GlobMatcher),
    Regex(Regex),
}

impl Pattern {
    pub fn new(pattern: &str) -> Result<Self, CrawlError> {
        let bad = |reason: String| CrawlError::Pattern { pattern: pattern.into(), reason };
        match pattern.strip_prefix("re:") {
            Some(re) => Regex::new(re).map(Pattern::Regex).map_err(|e| bad(e.to_string())),
            None => Glob::new(pattern).map(|g| Pattern::Glob(g.compile_matcher())).map_err(|e| bad(e.to_string())),
        }
    }

    pub fn is_match(&self, s: &str) -> bool {
        match self {
            Pattern::Glob(g) => g.is_match(s),
            Pattern::Regex(r) => r.is_match(s),
        }
    }
}

fn compile_patterns(patterns: &[String]) -> Result<Vec<Pattern>, CrawlError> {
    patterns.iter().map(|p| Pattern::new(p)).collect()
}

// ---------------------------------------------------------------------------
// Manifest and report

fn default_true() -> bool {
    true
}
fn default_rate() -> f64 {
    2.0
}
fn default_workers() -> usize {
    4
}
fn default_max_bytes() -> u64 {
    10 * 1024 * 1024
}
fn default_user_agent() -> String {
    concat!("forge-crawler/", env!("CARGO_PKG_VERSION")).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrawlManifest {
    pub seed_urls: Vec<String>,
    #[serde(default = "default_true")]
    pub same_host_only: bool,
    #[serde(default)]
    pub max_depth: u32,
    #[serde(default = "default_max_bytes")]
    pub max_file_bytes: u64,
    /// Matched against the full URL; empty means everything.
    #[serde(default)]
    pub include_patterns: Vec<String>,
    #[serde(default)]
    pub exclude_patterns: Vec<String>,
    /// Maximum requests per second.
    #[serde(default = "default_rate")]
    pub rate_limit: f64,
    #[serde(default = "default_true")]
    pub obey_robots: bool,
    /// Set by the caller when the manifest is part of a project.
    #[serde(default)]
    pub output_dir: PathBuf,
    /// Also follow `img`/`script`/`link` references, not only anchors.
    #[serde(default = "default_true")]
    pub follow_assets: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_user_agent")]
    pub user_agent: String,
}

impl CrawlManifest {
    pub fn new(seed_urls: Vec<String>, output_dir: impl Into<PathBuf>) -> Self {
        CrawlManifest {
            seed_urls,
            same_host_only: true,
            max_depth: 0,
            max_file_bytes: default_max_bytes(),
            include_patterns: Vec::new(),
            exclude_patterns: Vec::new(),
            rate_limit: default_rate(),
            obey_robots: true,
            output_dir: output_dir.into(),
            follow_assets: true,
            workers: default_workers(),
            user_agent: default_user_agent(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CrawlError> {
        let m: CrawlManifest = toml::from_str(text).map_err(|e| CrawlError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<Vec<Url>, CrawlError> {
        if self.seed_urls.is_empty() {
            return Err(CrawlError::Manifest("seed_urls must not be empty".into()));
        }
        if !(self.rate_limit.is_finite() && self.rate_limit > 0.0) {
            return Err(CrawlError::Manifest(format!("rate_limit must be positive, got {}", self.rate_limit)));
        }
        if self.workers == 0 {
            return Err(CrawlError::Manifest("workers must be at least 1".into()));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(CrawlError::Manifest("output_dir must be set".into()));
        }
        compile_patterns(&self.include_patterns)?;
        compile_patterns(&self.exclude_patterns)?;
        self.seed_urls.iter().map(|s| parse_http_url(s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchedFile {
    pub url: String,
    /// Relative to the output directory.
    pub local_path: PathBuf,
    pub content_type: String,
    pub size_bytes: u64,
    pub content_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Excluded,
    OffHost,
    RobotsDisallowed,
    TooLarge,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Skipped {
    pub url: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Failure {
    pub url: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlReport {
    pub fetched: usize,
    pub skipped: usize,
    pub failed: usize,
    pub bytes: u64,
    pub elapsed_ms: u64,
    pub skipped_urls: Vec<Skipped>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlOutcome {
    pub report: CrawlReport,
    pub files: Vec<FetchedFile>,
}

// ---------------------------------------------------------------------------
// Link extraction and robots.txt

static LINK_ATTR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?is)<(a|area|img|script|link|iframe|frame|source)\b[^>]*?\b(?:href|src)\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'>]+))"#,
    )
    .unwrap()
});

/// Absolute http(s) links of a page, fragments removed, in document order.
pub fn extract_links(html: &str, base: &Url, include_assets: bool) -> Vec<Url> {
    LINK_ATTR
        .captures_iter(html)
        .filter(|c| include_assets || matches!(c[1].to_ascii_lowercase().as_str(), "a" | "area"))
        .filter_map(|c| {
            let raw = c.get(2).or(c.get(3)).or(c.get(4))?.as_str();
            let decoded = html_escape::decode_html_entities(raw.trim());
            let mut url = base.join(&decoded).ok()?;
            url.set_fragment(None);
            matches!(url.scheme(), "http" | "https").then_some(url)
        })
        .collect()
}

/// Allow/Disallow prefixes that apply to one user agent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RobotsRules {
    rules: Vec<(String, bool)>,
}

impl RobotsRules {
    /// Parses the groups addressed to `*` or to the agent's product token.
    pub fn parse(text: &str, user_agent: &str) -> Self {
        let token = user_agent.split('/').next().unwrap_or("").to_ascii_lowercase();
        let mut specific: Vec<(String, bool)> = Vec::new();
        let mut generic: Vec<(String, bool)> = Vec::new();
        let mut group_agents: Vec<String> = Vec::new();
        let mut in_rules = false;
        let mut found_specific = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((field, value)) = line.split_once(':') else { continue };
            let (field, value) = (field.trim().to_ascii_lowercase(), value.trim());
            match field.as_str() {
                "user-agent" => {
                    if in_rules {
                        group_agents.clear();
                        in_rules = false;
                    }
                    group_agents.push(value.to_ascii_lowercase());
                }
                "allow" | "disallow" => {
                    in_rules = true;
                    if value.is_empty() {
                        continue;
                    }
                    let rule = (value.to_string(), field == "allow");
                    if group_agents.iter().any(|a| !token.is_empty() && a == &token) {
                        found_specific = true;
                        specific.push(rule.clone());
                    }
                    if group_agents.iter().any(|a| a == "*") {
                        generic.push(rule);
                    }
                }
                _ => {}
            }
        }
        RobotsRules { rules: if found_specific { specific } else { generic } }
    }

    /// Longest matching prefix decides; allow wins ties.
    pub fn allows(&self, url: &Url) -> bool {
        let mut target = url.path().to_string();
        if let Some(q) = url.query() {
            target.push('?');
            target.push_str(q);
        }
        self.rules
            .iter()
            .filter(|(prefix, _)| target.starts_with(prefix.as_str()))
            .max_by_key(|(prefix, allow)| (prefix.len(), *allow))
            .is_none_or(|(_, allow)| *allow)
    }
}

// ---------------------------------------------------------------------------
// Crawling

/// Spaces request starts at least `1 / rate` seconds apart.
struct Pacer {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl Pacer {
    fn new(rate: f64) -> Self {
        Pacer { interval: Duration::from_secs_f64(1.0 / rate), next: Mutex::new(None) }
    }

    async fn wait(&self) {
        let mut next = self.next.lock().await;
        let now = Instant::now();
        let start = match *next {
            Some(t) if t > now => t,
            _ => now,
        };
        *next = Some(start + self.interval);
        drop(next);
        tokio::time::sleep_until(start.into()).await;
    }
}

enum FetchResult {
    Stored { file: FetchedFile, links: Vec<Url> },
    TooLarge,
    Failed(Failure),
}

struct Crawler {
    manifest: CrawlManifest,
    client: reqwest::Client,
    pacer: Pacer,
    include: Vec<Pattern>,
    exclude: Vec<Pattern>,
    hosts: BTreeSet<String>,
    robots: Mutex<HashMap<String, Arc<RobotsRules>>>,
}

fn origin_key(url: &Url) -> String {
    url.origin().ascii_serialization()
}

impl Crawler {
    fn admissible(&self, url: &Url) -> Result<(), SkipReason> {
        if self.manifest.same_host_only && !self.hosts.contains(&origin_key(url)) {
            return Err(SkipReason::OffHost);
        }
        let s = url.as_str();
        if !self.include.is_empty() && !self.include.iter().any(|p| p.is_match(s)) {
            return Err(SkipReason::Excluded);
        }
        if self.exclude.iter().any(|p| p.is_match(s)) {
            return Err(SkipReason::Excluded);
        }
        Ok(())
    }

    async fn robots_for(&self, url: &Url) -> Arc<RobotsRules> {
        let key = origin_key(url);
        let mut cache = self.robots.lock().await;
        if let Some(rules) = cache.get(&key) {
            return rules.clone();
        }
        let rules = match url.join("/robots.txt") {
            Ok(robots_url) => {
                self.pacer.wait().await;
                match self.client.get(robots_url).send().await {
                    Ok(resp) if resp.status().is_success() => {
                        let text = resp.text().await.unwrap_or_default();
                        RobotsRules::parse(&text, &self.manifest.user_agent)
                    }
                    _ => RobotsRules::default(),
                }
            }
            Err(_) => RobotsRules::default(),
        };
        let rules = Arc::new(rules);
        cache.insert(key, rules.clone());
        rules
    }

    async fn fetch(&self, url: &Url) -> FetchResult {
        let fail = |status: Option<u16>, error: String| FetchResult::Failed(Failure { url: url.to_string(), status, error });
        self.pacer.wait().await;
        let mut resp = match self.client.get(url.clone()).send().await {
            Ok(r) => r,
            Err(e) => return fail(None, e.to_string()),
        };
        let status = resp.status();
        if !status.is_success() {
            return fail(Some(status.as_u16()), format!("HTTP {status}"));
        }
        let limit = self.manifest.max_file_bytes;
        if resp.content_length().is_some_and(|n| n > limit) {
            return FetchResult::TooLarge;
        }
        let content_type = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("application/octet-stream")
            .to_string();
        let mut body = Vec::new();
        loop {
            match resp.chunk().await {
                Ok(Some(chunk)) => {
                    body.extend_from_slice(&chunk);
                    if body.len() as u64 > limit {
                        return FetchResult::TooLarge;
                    }
                }
                Ok(None) => break,
                Err(e) => return fail(Some(status.as_u16()), e.to_string()),
            }
        }

        let local_path = url_path(url);
        debug_assert!(is_contained(&local_path));
        let dest = self.manifest.output_dir.join(&local_path);
        let write = async {
            if let Some(parent) = dest.parent() {
                tokio::fs::create_dir_all(parent).await?;
            }
            tokio::fs::write(&dest, &body).await
        };
        if let Err(e) = write.await {
            return fail(Some(status.as_u16()), format!("cannot write {}: {e}", dest.display()));
        }

        let links = if content_type.to_ascii_lowercase().contains("html") {
            extract_links(&String::from_utf8_lossy(&body), url, self.manifest.follow_assets)
        } else {
            Vec::new()
        };
        let file = FetchedFile {
            url: url.to_string(),
            local_path,
            content_type,
            size_bytes: body.len() as u64,
            content_hash: sha256_hex(&body),
        };
        FetchResult::Stored { file, links }
    }
}

/// Breadth-first mirror of the manifest's seeds, level by level up to
/// `max_depth`. Per-URL failures are recorded in the report; only an unusable
/// manifest or output directory is an error.
pub async fn crawl(manifest: &CrawlManifest) -> Result<CrawlOutcome, CrawlError> {
    let started = Instant::now();
    let seeds = manifest.validate()?;
    tokio::fs::create_dir_all(&manifest.output_dir).await.map_err(io_err(&manifest.output_dir))?;

    let client = reqwest::Client::builder()
        .user_agent(manifest.user_agent.clone())
        .timeout(Duration::from_secs(30))
        .build()
        .map_err(|e| CrawlError::Manifest(e.to_string()))?;
    let crawler = Arc::new(Crawler {
        manifest: manifest.clone(),
        client,
        pacer: Pacer::new(manifest.rate_limit),
        include: compile_patterns(&manifest.include_patterns)?,
        exclude: compile_patterns(&manifest.exclude_patterns)?,
        hosts: seeds.iter().map(origin_key).collect(),
        robots: Mutex::new(HashMap::new()),
    });
    let workers = Arc::new(Semaphore::new(manifest.workers));

    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut skipped: BTreeMap<String, SkipReason> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut files = Vec::new();
    let mut level: Vec<Url> = Vec::new();
    for seed in seeds {
        if seen.insert(seed.to_string()) {
            level.push(seed);
        }
    }

    for depth in 0..=manifest.max_depth {
        let mut to_fetch = Vec::new();
        for url in level.drain(..) {
            if let Err(reason) = crawler.admissible(&url) {
                skipped.insert(url.to_string(), reason);
                continue;
            }
            if manifest.obey_robots && !crawler.robots_for(&url).await.allows(&url) {
                tracing::info!(%url, "disallowed by robots.txt");
                skipped.insert(url.to_string(), SkipReason::RobotsDisallowed);
                continue;
            }
            to_fetch.push(url);
        }

        let mut tasks = Vec::with_capacity(to_fetch.len());
        for url in to_fetch {
            let crawler = crawler.clone();
            let workers = workers.clone();
            tasks.push(tokio::spawn(async move {
                let _permit = workers.acquire_owned().await.expect("semaphore is never closed");
                let result = crawler.fetch(&url).await;
                (url, result)
            }));
        }
        let mut results = Vec::with_capacity(tasks.len());
        for task in tasks {
            results.push(task.await.expect("fetch task panicked"));
        }
        results.sort_by(|a, b| a.0.as_str().cmp(b.0.as_str()));

        let mut next = Vec::new();
        for (url, result) in results {
            match result {
                FetchResult::Stored { file, links } => {
                    files.push(file);
                    if depth < manifest.max_depth {
                        for link in links {
                            if seen.insert(link.to_string()) {
                                next.push(link);
                            }
                        }
                    }
                }
                FetchResult::TooLarge => {
                    skipped.insert(url.to_string(), SkipReason::TooLarge);
                }
                FetchResult::Failed(f) => {
                    tracing::warn!(url = %f.url, error = %f.error, "fetch failed");
                    failures.push(f);
                }
            }
        }
        next.sort_by(|a, b| a.as_str().cmp(b.as_str()));
        level = next;
        if level.is_empty() {
            break;
        }
    }

    files.sort_by(|a, b| a.local_path.cmp(&b.local_path));
    failures.sort();
    let report = CrawlReport {
        fetched: files.len(),
        skipped: skipped.len(),
        failed: failures.len(),
        bytes: files.iter().map(|f| f.size_bytes).sum(),
        elapsed_ms: started.elapsed().as_millis() as u64,
        skipped_urls: skipped.into_iter().map(|(url, reason)| Skipped { url, reason }).collect(),
        failures,
    };
    let outcome = CrawlOutcome { report, files };
    let report_path = manifest.output_dir.join(REPORT_FILE);
    let json = serde_json::to_vec_pretty(&outcome).expect("report serializes");
    tokio::fs::write(&report_path, json).await.map_err(io_err(&report_path))?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// Pruning

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneReport {
    pub kept: Vec<PathBuf>,
    /// Files moved under `.quarantine/prune`, relative to the pruned folder.
    pub removed: Vec<PathBuf>,
}

/// Quarantines every file under `dir` whose name matches none of
/// `keep_patterns`. An empty pattern list is refused unless `force` is set.
/// Undo with [`restore_pruned`].
pub fn prune_noise(dir: &Path, keep_patterns: &[String], force: bool) -> Result<PruneReport, CrawlError> {
    if keep_patterns.is_empty() && !force {
        return Err(CrawlError::Manifest("empty keep pattern list would quarantine every file; pass force".into()));
    }
    let patterns = compile_patterns(keep_patterns)?;
    let mut report = PruneReport::default();
    for rel in fsutil::walk_files(dir).map_err(io_err(dir))? {
        let name = fsutil::file_name_string(&rel);
        if name == REPORT_FILE {
            continue;
        }
        if patterns.iter().any(|p| p.is_match(&name)) {
            report.kept.push(rel);
        } else {
            fsutil::quarantine(dir, &rel, "prune").map_err(io_err(&dir.join(&rel)))?;
            report.removed.push(rel);
        }
    }
    Ok(report)
}

pub fn restore_pruned(dir: &Path) -> Result<Vec<PathBuf>, CrawlError> {
    fsutil::restore_quarantine(dir, "prune").map_err(io_err(dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    #[test]
    fn query_string_is_kept_in_file_name() {
        assert_eq!(
            sanitize_url_to_path("https://x.org/jvi.aspx?pdir=tkd&plng=tur&un=TKDA-00090").unwrap(),
            PathBuf::from("x.org/jvi.aspx_pdir=tkd&plng=tur&un=TKDA-00090")
        );
    }

    #[test]
    fn empty_path_is_index() {
        assert_eq!(sanitize_url_to_path("https://x.org/").unwrap(), PathBuf::from("x.org/index.html"));
        assert_eq!(sanitize_url_to_path("https://x.org").unwrap(), PathBuf::from("x.org/index.html"));
        assert_eq!(sanitize_url_to_path("http://x.org/a/b/").unwrap(), PathBuf::from("x.org/a/b/index.html"));
    }

    #[test]
    fn only_first_question_mark_delimits_query() {
        // Oracle: split the raw string on the first '?' only.
        let raw = "https://x.org/a/b?q=1?r=2";
        let (_, query) = raw.split_once('?').unwrap();
        assert_eq!(query, "q=1?r=2");
        assert_eq!(Url::parse(raw).unwrap().query(), Some(query));
        assert_eq!(sanitize_url_to_path(raw).unwrap(), PathBuf::from("x.org/a/b_q=1%3Fr=2"));
    }

    #[test]
    fn ports_fragments_and_odd_characters() {
        assert_eq!(
            sanitize_url_to_path("http://127.0.0.1:8080/p#frag").unwrap(),
            PathBuf::from("127.0.0.1%3A8080/p")
        );
        assert_eq!(sanitize_url_to_path("http://x.org/a:b*c|d").unwrap(), PathBuf::from("x.org/a%3Ab%2Ac%7Cd"));
        assert_eq!(sanitize_url_to_path("http://x.org/s?next=/a/b").unwrap(), PathBuf::from("x.org/s_next=%2Fa%2Fb"));
    }

    #[test]
    fn malformed_urls_are_echoed() {
        for bad in ["not a url", "ftp://x.org/f", "/relative/path", "mailto:a@b.c"] {
            match sanitize_url_to_path(bad) {
                Err(CrawlError::BadUrl(echo)) => assert_eq!(echo, bad),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn mapped_paths_stay_inside_the_mirror(
            host in "[a-z]{1,8}(\\.[a-z]{2,3})?",
            segs in proptest::collection::vec(
                prop_oneof![Just("..".to_string()), Just(".".to_string()), Just("%2e%2e".to_string()),
                            Just(String::new()), Just("\\..".to_string()), "[a-zA-Z0-9._~:*|<>\"%-]{0,6}"],
                0..6),
            query in proptest::option::of("[a-z0-9=&?/.%]{0,12}"),
        ) {
            let mut raw = format!("http://{host}/{}", segs.join("/"));
            if let Some(q) = query { raw.push('?'); raw.push_str(&q); }
            if let Ok(path) = sanitize_url_to_path(&raw) {
                prop_assert!(is_contained(&path), "{raw} -> {path:?}");
                prop_assert!(path.is_relative());
                prop_assert!(path.components().count() >= 2);
            }
        }
    }

    #[test]
    fn links_are_resolved_and_filtered() {
        let base = Url::parse("http://x.org/dir/page.html").unwrap();
        let html = r#"<a href="jvi.aspx?pdir=tkd&amp;plng=tur&amp;un=TKDA-1#top">t</a>
            <A HREF='/abs'>a</A> <img src=logo.png> <a href="mailto:a@b.c">m</a>
            <link rel="stylesheet" href="style.css"><script src="https://cdn.example/x.js"></script>"#;
        let all: Vec<String> = extract_links(html, &base, true).iter().map(|u| u.to_string()).collect();
        assert_eq!(
            all,
            vec![
                "http://x.org/dir/jvi.aspx?pdir=tkd&plng=tur&un=TKDA-1",
                "http://x.org/abs",
                "http://x.org/dir/logo.png",
                "http://x.org/dir/style.css",
                "https://cdn.example/x.js",
            ]
        );
        assert_eq!(extract_links(html, &base, false).len(), 2);
    }

    #[test]
    fn robots_longest_prefix() {
        let rules = RobotsRules::parse(
            "User-agent: *\nDisallow: /private\nAllow: /private/ok\n\nUser-agent: other\nDisallow: /\n",
            "forge-crawler/0.1",
        );
        let u = |p: &str| Url::parse(&format!("http://x.org{p}")).unwrap();
        assert!(rules.allows(&u("/public")));
        assert!(!rules.allows(&u("/private/x")));
        assert!(rules.allows(&u("/private/ok/1")));
        let mine = RobotsRules::parse("User-agent: forge-crawler\nDisallow: /a\nUser-agent: *\nDisallow: /\n", "forge-crawler/0.1");
        assert!(mine.allows(&u("/b")) && !mine.allows(&u("/a")));
        assert!(RobotsRules::parse("User-agent: *\nDisallow:\n", "x").allows(&u("/any")));
    }

    #[test]
    fn manifest_validation() {
        let mut m = CrawlManifest::new(vec![], "/tmp/x");
        assert!(m.validate().is_err());
        m.seed_urls = vec!["https://x.org/".into()];
        assert!(m.validate().is_ok());
        m.rate_limit = 0.0;
        assert!(m.validate().is_err());
        m.rate_limit = 1.0;
        m.seed_urls.push("file:///etc/passwd".into());
        assert!(matches!(m.validate(), Err(CrawlError::BadUrl(_))));
        let parsed = CrawlManifest::from_toml(
            "seed_urls = [\"http://x.org/\"]\nmax_depth = 3\nexclude_patterns = [\"*.png\", \"re:\\\\.jpe?g$\"]\noutput_dir = \"mirror\"\n",
        )
        .unwrap();
        assert_eq!(parsed.max_depth, 3);
        assert!(parsed.obey_robots);
        assert_eq!(parsed.rate_limit, 2.0);
    }

    #[test]
    fn patterns_glob_and_regex() {
        let glob = Pattern::new("*.png").unwrap();
        assert!(glob.is_match("http://x.org/img/logo.png"));
        assert!(!glob.is_match("http://x.org/a.html"));
        let re = Pattern::new("re:plng=(tur|eng)").unwrap();
        assert!(re.is_match("jvi.aspx?plng=tur"));
        assert!(Pattern::new("re:(").is_err());
    }

    fn touch_all(dir: &Path, names: impl IntoIterator<Item = String>) {
        for n in names {
            let p = dir.join(n);
            fs::create_dir_all(p.parent().unwrap()).unwrap();
            fs::write(p, b"x").unwrap();
        }
    }

    #[test]
    fn prune_keeps_html_and_quarantines_the_rest() {
        let dir = tempfile::tempdir().unwrap();
        touch_all(dir.path(), (0..100).map(|i| format!("pages/p{i}.html")));
        touch_all(dir.path(), (0..3000).map(|i| format!("assets/f{i}.{}", ["png", "css", "js"][i % 3])));
        let report = prune_noise(dir.path(), &["*.html".into()], false).unwrap();
        assert_eq!(report.kept.len(), 100);
        assert_eq!(report.removed.len(), 3000);
        assert_eq!(fsutil::walk_files(dir.path()).unwrap().len(), 100);
        assert_eq!(restore_pruned(dir.path()).unwrap().len(), 3000);
        assert_eq!(fsutil::walk_files(dir.path()).unwrap().len(), 3100);
    }

    #[test]
    fn prune_with_everything_matching_removes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        touch_all(dir.path(), ["a.html".to_string(), "b.html".to_string()]);
        let report = prune_noise(dir.path(), &["*.html".into()], false).unwrap();
        assert!(report.removed.is_empty());
        assert_eq!(report.kept.len(), 2);
    }

    #[test]
    fn prune_by_query_name_pattern() {
        let dir = tempfile::tempdir().unwrap();
        let names = [
            "jvi.aspx_pdir=tkd&plng=tur&un=TKDA-00090",
            "jvi.aspx_pdir=tkd&plng=eng&un=TKDA-00090",
            "jvi.aspx_pdir=tkd&plng=tur&un=TKDA-24582",
            "style.css",
            "site.css_v=3",
            "index.html",
        ];
        touch_all(dir.path(), names.map(String::from));
        let report = prune_noise(dir.path(), &["*.aspx_*".into()], false).unwrap();
        assert_eq!(report.kept, names[..3].iter().map(PathBuf::from).collect::<BTreeSet<_>>().into_iter().collect::<Vec<_>>());
        assert_eq!(report.removed, vec![PathBuf::from("index.html"), PathBuf::from("site.css_v=3"), PathBuf::from("style.css")]);
    }

    #[test]
    fn empty_keep_list_needs_force() {
        let dir = tempfile::tempdir().unwrap();
        touch_all(dir.path(), ["a.html".to_string()]);
        assert!(prune_noise(dir.path(), &[], false).is_err());
        assert_eq!(prune_noise(dir.path(), &[], true).unwrap().removed.len(), 1);
    }
}
