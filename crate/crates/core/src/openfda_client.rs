//! openFDA device recall / classification retrieval.
//!
//! Pages are requested with `limit`/`skip`, stored verbatim under
//! `<cache_dir>/<endpoint>/<page_index>.json`, and never requested again once
//! cached. A `manifest.json` next to the pages records the query parameters
//! and retrieval times.

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;
use thiserror::Error;
use url::Url;

pub const DEFAULT_BASE_URL: &str = "https://api.fda.gov";
pub const MAX_PAGE_SIZE: usize = 1000;
pub const DEFAULT_MAX_PAGES: usize = 7;
pub const API_KEY_ENV: &str = "OPENFDA_API_KEY";
const MAX_ATTEMPTS: usize = 3;
const EXCERPT_LEN: usize = 200;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("invalid fetch spec: {0}")]
    InvalidSpec(String),
    #[error("page {page}: transport failure after {attempts} attempts: {message}")]
    Transport {
        page: usize,
        attempts: usize,
        message: String,
    },
    #[error("page {page}: HTTP {status}: {excerpt}")]
    Request { page: usize, status: u16, excerpt: String },
    #[error("page {page}: malformed response: {message}")]
    Parse { page: usize, message: String },
    #[error("page {page} is not cached and could not be fetched: {source}")]
    MissingPage {
        page: usize,
        #[source]
        source: Box<FetchError>,
    },
    #[error("cache at {path} was built for different query parameters ({detail})")]
    CacheMismatch { path: String, detail: String },
    #[error("cache {path}: {source}")]
    Cache {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl FetchError {
    pub fn is_network(&self) -> bool {
        match self {
            FetchError::Transport { .. } | FetchError::Request { .. } => true,
            FetchError::MissingPage { source, .. } => source.is_network(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Recall,
    Classification,
}

impl Endpoint {
    pub fn path(self) -> &'static str {
        match self {
            Endpoint::Recall => "/device/recall.json",
            Endpoint::Classification => "/device/classification.json",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Endpoint::Recall => "recall",
            Endpoint::Classification => "classification",
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchSpec {
    pub endpoint: Endpoint,
    pub date_from: NaiveDate,
    pub date_to: NaiveDate,
    pub page_size: usize,
    pub max_pages: usize,
    pub api_key: Option<String>,
}

impl FetchSpec {
    pub fn new(endpoint: Endpoint, date_from: NaiveDate, date_to: NaiveDate) -> Self {
        Self {
            endpoint,
            date_from,
            date_to,
            page_size: MAX_PAGE_SIZE,
            max_pages: DEFAULT_MAX_PAGES,
            api_key: None,
        }
    }

    pub fn validate(&self) -> Result<(), FetchError> {
        if self.page_size == 0 || self.page_size > MAX_PAGE_SIZE {
            return Err(FetchError::InvalidSpec(format!(
                "page_size must be in 1..={MAX_PAGE_SIZE}, got {}",
                self.page_size
            )));
        }
        if self.max_pages == 0 {
            return Err(FetchError::InvalidSpec("max_pages must be at least 1".into()));
        }
        if self.date_from > self.date_to {
            return Err(FetchError::InvalidSpec(format!(
                "date_from {} is after date_to {}",
                self.date_from, self.date_to
            )));
        }
        Ok(())
    }

    /// The `search` expression; classifications are not date-scoped.
    pub fn search(&self) -> Option<String> {
        match self.endpoint {
            Endpoint::Recall => Some(format!(
                "event_date_posted:[{} TO {}]",
                self.date_from.format("%Y-%m-%d"),
                self.date_to.format("%Y-%m-%d")
            )),
            Endpoint::Classification => None,
        }
    }

    pub fn page_url(&self, base: &Url, page_index: usize) -> Url {
        let mut url = base.join(self.endpoint.path()).expect("endpoint paths are valid");
        {
            let mut q = url.query_pairs_mut();
            if let Some(search) = self.search() {
                q.append_pair("search", &search);
            }
            q.append_pair("limit", &self.page_size.to_string());
            q.append_pair("skip", &(page_index * self.page_size).to_string());
            if let Some(key) = &self.api_key {
                q.append_pair("api_key", key);
            }
        }
        url
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPage {
    pub page_index: usize,
    pub payload: Vec<u8>,
    pub record_count: usize,
    pub retrieved_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// One HTTP GET. Implementations return `Err` only for transport failures;
/// HTTP error statuses come back as a response.
pub trait Transport {
    fn get(&self, url: &Url) -> Result<HttpResponse, String>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(concat!("recall-initiators/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &Url) -> Result<HttpResponse, String> {
        let resp = self.client.get(url.clone()).send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.bytes().map_err(|e| e.to_string())?.to_vec();
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: MAX_ATTEMPTS,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        Self {
            attempts: MAX_ATTEMPTS,
            base_delay: Duration::ZERO,
        }
    }
}

/// Everything needed to run a fetch besides the spec and cache location.
pub struct Fetcher<'a> {
    pub transport: &'a dyn Transport,
    pub base_url: Url,
    pub retry: RetryPolicy,
    pub clock: fn() -> DateTime<Utc>,
}

impl<'a> Fetcher<'a> {
    pub fn new(transport: &'a dyn Transport, base_url: Url) -> Self {
        Self {
            transport,
            base_url,
            retry: RetryPolicy::default(),
            clock: Utc::now,
        }
    }

    /// Pages `0..k` (`k <= max_pages`), reading cache first and stopping at
    /// the first short page.
    pub fn fetch_pages(&self, spec: &FetchSpec, cache_dir: &Path) -> Result<Vec<RawPage>, FetchError> {
        spec.validate()?;
        let cache = PageCache::open(cache_dir, spec.endpoint)?;
        let mut manifest = cache.load_manifest()?;
        let query = ManifestQuery::from_spec(spec, &self.base_url);
        match &manifest {
            Some(m) if m.query != query => {
                return Err(FetchError::CacheMismatch {
                    path: cache.dir.display().to_string(),
                    detail: format!("cached {:?}, requested {:?}", m.query, query),
                });
            }
            _ => {}
        }
        let manifest = manifest.get_or_insert_with(|| Manifest {
            query: query.clone(),
            pages: Vec::new(),
        });

        let mut pages = Vec::new();
        let mut dirty = false;
        for page_index in 0..spec.max_pages {
            let page = match cache.read(page_index, manifest)? {
                Some(page) => page,
                None => match self.download(spec, page_index) {
                    Ok(Some(page)) => {
                        cache.write(&page)?;
                        manifest.record(&page);
                        dirty = true;
                        page
                    }
                    // openFDA answers 404 once skip runs past the last match
                    Ok(None) => break,
                    Err(e) if page_index > 0 => {
                        if dirty {
                            cache.save_manifest(manifest)?;
                        }
                        return Err(FetchError::MissingPage {
                            page: page_index,
                            source: Box::new(e),
                        });
                    }
                    Err(e) => return Err(e),
                },
            };
            let short = page.record_count < spec.page_size;
            pages.push(page);
            if short {
                break;
            }
        }
        if dirty {
            cache.save_manifest(manifest)?;
        }
        Ok(pages)
    }

    fn download(&self, spec: &FetchSpec, page_index: usize) -> Result<Option<RawPage>, FetchError> {
        let url = spec.page_url(&self.base_url, page_index);
        let mut last_error = String::new();
        for attempt in 0..self.retry.attempts.max(1) {
            if attempt > 0 {
                thread::sleep(self.retry.base_delay * (1u32 << (attempt - 1)));
            }
            log::debug!("GET {} (attempt {})", redact(&url), attempt + 1);
            let resp = match self.transport.get(&url) {
                Ok(resp) => resp,
                Err(e) => {
                    last_error = e;
                    continue;
                }
            };
            match resp.status {
                200..=299 => {
                    let record_count = count_results(&resp.body, page_index)?;
                    return Ok(Some(RawPage {
                        page_index,
                        payload: resp.body,
                        record_count,
                        retrieved_at: (self.clock)(),
                    }));
                }
                404 if is_not_found(&resp.body) => return Ok(None),
                429 | 500..=599 => {
                    last_error = format!("HTTP {}: {}", resp.status, excerpt(&resp.body));
                }
                status => {
                    return Err(FetchError::Request {
                        page: page_index,
                        status,
                        excerpt: excerpt(&resp.body),
                    })
                }
            }
        }
        Err(FetchError::Transport {
            page: page_index,
            attempts: self.retry.attempts.max(1),
            message: last_error,
        })
    }
}

fn redact(url: &Url) -> String {
    let mut url = url.clone();
    let pairs: Vec<(String, String)> = url
        .query_pairs()
        .map(|(k, v)| {
            let v = if k == "api_key" {
                "***".to_string()
            } else {
                v.into_owned()
            };
            (k.into_owned(), v)
        })
        .collect();
    url.query_pairs_mut().clear().extend_pairs(pairs);
    url.to_string()
}

fn excerpt(body: &[u8]) -> String {
    let text = String::from_utf8_lossy(body);
    let mut out: String = text.chars().take(EXCERPT_LEN).collect();
    if text.chars().count() > EXCERPT_LEN {
        out.push_str("...");
    }
    out.replace(['\n', '\r'], " ")
}

fn is_not_found(body: &[u8]) -> bool {
    serde_json::from_slice::<Value>(body)
        .ok()
        .and_then(|v| {
            v.pointer("/error/code")
                .and_then(Value::as_str)
                .map(|c| c == "NOT_FOUND")
        })
        .unwrap_or(false)
}

fn results_array(payload: &[u8], page: usize) -> Result<Vec<Value>, FetchError> {
    let value: Value = serde_json::from_slice(payload).map_err(|e| FetchError::Parse {
        page,
        message: e.to_string(),
    })?;
    match value {
        Value::Object(mut obj) => match obj.remove("results") {
            Some(Value::Array(items)) => Ok(items),
            Some(_) => Err(FetchError::Parse {
                page,
                message: "`results` is not an array".into(),
            }),
            None => Err(FetchError::Parse {
                page,
                message: "missing `results` array".into(),
            }),
        },
        _ => Err(FetchError::Parse {
            page,
            message: "response body is not a JSON object".into(),
        }),
    }
}

fn count_results(payload: &[u8], page: usize) -> Result<usize, FetchError> {
    results_array(payload, page).map(|r| r.len())
}

/// Recall columns as served by openFDA; empty string marks an absent field.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartialRecall {
    pub product_code: String,
    pub event_date_posted: String,
    pub recalling_firm: String,
    pub root_cause_description: String,
    pub product_quantity: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub product_code: String,
    pub device_name: String,
    pub device_class: String,
}

fn text_field(entry: &Value, key: &str) -> String {
    match entry.get(key) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => String::new(),
    }
}

pub fn parse_recall_page(page: &RawPage) -> Result<Vec<PartialRecall>, FetchError> {
    Ok(results_array(&page.payload, page.page_index)?
        .iter()
        .map(|e| PartialRecall {
            product_code: text_field(e, "product_code"),
            event_date_posted: text_field(e, "event_date_posted"),
            recalling_firm: text_field(e, "recalling_firm"),
            root_cause_description: text_field(e, "root_cause_description"),
            product_quantity: text_field(e, "product_quantity"),
        })
        .collect())
}

pub fn parse_classification_page(page: &RawPage) -> Result<Vec<ClassificationRecord>, FetchError> {
    Ok(results_array(&page.payload, page.page_index)?
        .iter()
        .map(|e| ClassificationRecord {
            product_code: text_field(e, "product_code"),
            device_name: text_field(e, "device_name"),
            device_class: text_field(e, "device_class"),
        })
        .collect())
}

/// Read back every cached page of an endpoint, in page order, without any
/// network access.
pub fn load_cached_pages(cache_dir: &Path, endpoint: Endpoint) -> Result<Vec<RawPage>, FetchError> {
    let cache = PageCache::open_existing(cache_dir, endpoint);
    let manifest = cache.load_manifest()?.ok_or_else(|| FetchError::Cache {
        path: cache.manifest_path().display().to_string(),
        source: io::Error::new(io::ErrorKind::NotFound, "no cache manifest"),
    })?;
    let mut indices: Vec<usize> = manifest.pages.iter().map(|p| p.page_index).collect();
    indices.sort_unstable();
    indices
        .into_iter()
        .map(|i| {
            cache.read(i, &manifest)?.ok_or_else(|| FetchError::Cache {
                path: cache.page_path(i).display().to_string(),
                source: io::Error::new(io::ErrorKind::NotFound, "page listed in manifest is missing"),
            })
        })
        .collect()
}

/// Cached pages for `spec`, offline: the cache must have been filled for
/// the same query. Returns the contiguous run of pages from 0, capped at
/// `max_pages` and cut after the first short page.
pub fn read_cached_pages(spec: &FetchSpec, base_url: &Url, cache_dir: &Path) -> Result<Vec<RawPage>, FetchError> {
    spec.validate()?;
    let cache = PageCache::open_existing(cache_dir, spec.endpoint);
    let manifest = cache.load_manifest()?.ok_or_else(|| FetchError::Cache {
        path: cache.manifest_path().display().to_string(),
        source: io::Error::new(io::ErrorKind::NotFound, "no cache manifest; run fetch first"),
    })?;
    let query = ManifestQuery::from_spec(spec, base_url);
    if manifest.query != query {
        return Err(FetchError::CacheMismatch {
            path: cache.dir.display().to_string(),
            detail: format!("cached {:?}, requested {:?}", manifest.query, query),
        });
    }
    let mut pages = Vec::new();
    for index in 0..spec.max_pages {
        let Some(page) = cache.read(index, &manifest)? else {
            break;
        };
        let short = page.record_count < spec.page_size;
        pages.push(page);
        if short {
            break;
        }
    }
    Ok(pages)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ManifestQuery {
    base_url: String,
    endpoint: Endpoint,
    search: Option<String>,
    page_size: usize,
}

impl ManifestQuery {
    fn from_spec(spec: &FetchSpec, base: &Url) -> Self {
        Self {
            base_url: base.as_str().trim_end_matches('/').to_string(),
            endpoint: spec.endpoint,
            search: spec.search(),
            page_size: spec.page_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ManifestPage {
    page_index: usize,
    record_count: usize,
    retrieved_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    query: ManifestQuery,
    pages: Vec<ManifestPage>,
}

impl Manifest {
    fn record(&mut self, page: &RawPage) {
        self.pages.retain(|p| p.page_index != page.page_index);
        self.pages.push(ManifestPage {
            page_index: page.page_index,
            record_count: page.record_count,
            retrieved_at: page.retrieved_at,
        });
        self.pages.sort_by_key(|p| p.page_index);
    }
}

struct PageCache {
    dir: PathBuf,
}

impl PageCache {
    fn open(cache_dir: &Path, endpoint: Endpoint) -> Result<Self, FetchError> {
        let cache = Self::open_existing(cache_dir, endpoint);
        fs::create_dir_all(&cache.dir).map_err(|source| FetchError::Cache {
            path: cache.dir.display().to_string(),
            source,
        })?;
        Ok(cache)
    }

    fn open_existing(cache_dir: &Path, endpoint: Endpoint) -> Self {
        Self {
            dir: cache_dir.join(endpoint.name()),
        }
    }

    fn page_path(&self, index: usize) -> PathBuf {
        self.dir.join(format!("{index}.json"))
    }

    fn manifest_path(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }

    fn load_manifest(&self) -> Result<Option<Manifest>, FetchError> {
        let path = self.manifest_path();
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| FetchError::Cache {
                path: path.display().to_string(),
                source: io::Error::new(io::ErrorKind::InvalidData, e),
            }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(FetchError::Cache {
                path: path.display().to_string(),
                source,
            }),
        }
    }

    fn save_manifest(&self, manifest: &Manifest) -> Result<(), FetchError> {
        let path = self.manifest_path();
        let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        bytes.push(b'\n');
        write_atomic(&path, &bytes)
    }

    fn read(&self, index: usize, manifest: &Manifest) -> Result<Option<RawPage>, FetchError> {
        let path = self.page_path(index);
        let payload = match fs::read(&path) {
            Ok(p) => p,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(source) => {
                return Err(FetchError::Cache {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let record_count = count_results(&payload, index)?;
        let retrieved_at = manifest
            .pages
            .iter()
            .find(|p| p.page_index == index)
            .map(|p| p.retrieved_at)
            .unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
        Ok(Some(RawPage {
            page_index: index,
            payload,
            record_count,
            retrieved_at,
        }))
    }

    fn write(&self, page: &RawPage) -> Result<(), FetchError> {
        write_atomic(&self.page_path(page.page_index), &page.payload)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FetchError> {
    let tmp = path.with_extension("json.tmp");
    let err = |source| FetchError::Cache {
        path: path.display().to_string(),
        source,
    };
    fs::write(&tmp, bytes).map_err(err)?;
    fs::rename(&tmp, path).map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page(body: &str) -> RawPage {
        RawPage {
            page_index: 4,
            payload: body.as_bytes().to_vec(),
            record_count: 0,
            retrieved_at: DateTime::<Utc>::UNIX_EPOCH,
        }
    }

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn parses_recall_entries_in_order() {
        let p = page(
            r#"{"meta":{},"results":[
            {"product_code":"FRN","event_date_posted":"2018-01-02","recalling_firm":"Smith Medical ASD Inc.",
             "root_cause_description":"Process design","product_quantity":"86 units","other":1},
            {"product_code":"FRN","event_date_posted":"2018-01-05","recalling_firm":"Repro-Med Systems, Inc.",
             "root_cause_description":"Nonconforming Material/Component"}]}"#,
        );
        let r = parse_recall_page(&p).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(
            r[0],
            PartialRecall {
                product_code: "FRN".into(),
                event_date_posted: "2018-01-02".into(),
                recalling_firm: "Smith Medical ASD Inc.".into(),
                root_cause_description: "Process design".into(),
                product_quantity: "86 units".into(),
            }
        );
        assert_eq!(r[1].product_quantity, "");
        assert!(parse_recall_page(&page(r#"{"results":[]}"#)).unwrap().is_empty());
    }

    #[test]
    fn parses_classification_entries() {
        let p = page(
            r#"{"results":[{"product_code":"FRN","device_name":"Pump, Infusion","device_class":"2"},
            {"product_code":"OSN","device_name":"Software For Diagnosis/Treatment"},
            {"product_code":"KME","device_name":"Bedding, Disposable, Medical","device_class":"1"}]}"#,
        );
        let c = parse_classification_page(&p).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].device_name, "Pump, Infusion");
        assert_eq!(c[0].device_class, "2");
        assert_eq!(c[1].device_class, "");
        assert_eq!(c[2].product_code, "KME");
    }

    #[test]
    fn malformed_payload_carries_page_index() {
        for body in ["not json", r#"{"error":{}}"#, r#"{"results":{}}"#, "[]"] {
            match parse_recall_page(&page(body)) {
                Err(FetchError::Parse { page, .. }) => assert_eq!(page, 4),
                other => panic!("expected parse error for {body}, got {other:?}"),
            }
        }
    }

    #[test]
    fn urls_use_documented_parameters() {
        let base = Url::parse(DEFAULT_BASE_URL).unwrap();
        let mut spec = FetchSpec::new(Endpoint::Recall, date("2018-01-01"), date("2024-04-15"));
        spec.api_key = Some("k".into());
        let url = spec.page_url(&base, 3);
        assert_eq!(url.path(), "/device/recall.json");
        let q: Vec<(String, String)> = url.query_pairs().map(|(a, b)| (a.into(), b.into())).collect();
        assert_eq!(
            q,
            [
                (
                    "search".to_string(),
                    "event_date_posted:[2018-01-01 TO 2024-04-15]".to_string()
                ),
                ("limit".into(), "1000".into()),
                ("skip".into(), "3000".into()),
                ("api_key".into(), "k".into()),
            ]
        );
        assert!(!redact(&url).contains("api_key=k"));
        let cls = FetchSpec::new(Endpoint::Classification, date("2018-01-01"), date("2024-04-15"));
        let url = cls.page_url(&base, 0);
        assert_eq!(url.path(), "/device/classification.json");
        assert!(url.query_pairs().all(|(k, _)| k != "search"));
    }

    #[test]
    fn spec_validation() {
        let mut spec = FetchSpec::new(Endpoint::Recall, date("2018-01-01"), date("2024-04-15"));
        assert!(spec.validate().is_ok());
        spec.page_size = 1001;
        assert!(spec.validate().is_err());
        spec.page_size = 1000;
        spec.max_pages = 0;
        assert!(spec.validate().is_err());
        spec.max_pages = 1;
        spec.date_from = date("2025-01-01");
        assert!(spec.validate().is_err());
    }

    #[test]
    fn excerpt_is_bounded_single_line() {
        let long = "x\n".repeat(500);
        let e = excerpt(long.as_bytes());
        assert!(e.len() <= EXCERPT_LEN + 3);
        assert!(!e.contains('\n'));
    }
}
