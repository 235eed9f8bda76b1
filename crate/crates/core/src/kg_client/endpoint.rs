use std::io::Read;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::answer::{normalize_answers, AnswerSet};
use super::cache::{CachedResponse, ResponseCache};
use super::QueryError;

const RESULTS_JSON: &str = "application/sparql-results+json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub url: String,
    pub timeout_seconds: f64,
    pub max_retries: u32,
    pub max_concurrent: usize,
    pub cache_path: Option<PathBuf>,
    /// First retry delay; doubles on every further attempt.
    pub retry_backoff_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            url: "http://localhost:8890/sparql".into(),
            timeout_seconds: 30.0,
            max_retries: 2,
            max_concurrent: 8,
            cache_path: None,
            retry_backoff_ms: 500,
        }
    }
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        EndpointConfig { url: url.into(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if !(self.timeout_seconds > 0.0 && self.timeout_seconds.is_finite()) {
            return Err(QueryError::Config(format!("timeout must be positive, got {}", self.timeout_seconds)));
        }
        if self.max_concurrent == 0 {
            return Err(QueryError::Config("max_concurrent must be at least 1".into()));
        }
        url::Url::parse(&self.url).map_err(|e| QueryError::Config(format!("bad endpoint url {}: {e}", self.url)))?;
        Ok(())
    }
}

/// Anything that can turn a query string into an answer set.
pub trait QueryExecutor: Sync {
    fn execute(&self, query: &str) -> Result<AnswerSet, QueryError>;

    /// Concurrency budget for `execute_many`.
    fn max_concurrent(&self) -> usize {
        1
    }

    /// Executes every query, keeping input order in the output.
    fn execute_many(&self, queries: &[String]) -> Vec<Result<AnswerSet, QueryError>> {
        let workers = self.max_concurrent().clamp(1, queries.len().max(1));
        if workers == 1 {
            return queries.iter().map(|q| self.execute(q)).collect();
        }
        let next = AtomicUsize::new(0);
        let mut out: Vec<Option<Result<AnswerSet, QueryError>>> = (0..queries.len()).map(|_| None).collect();
        let results: Vec<Vec<(usize, Result<AnswerSet, QueryError>)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut done = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= queries.len() {
                                break done;
                            }
                            done.push((i, self.execute(&queries[i])));
                        }
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("query worker panicked")).collect()
        });
        for (i, r) in results.into_iter().flatten() {
            out[i] = Some(r);
        }
        out.into_iter().map(|r| r.expect("every query executed")).collect()
    }
}

/// HTTP client for a SPARQL protocol endpoint.
pub struct KgClient {
    config: EndpointConfig,
    agent: ureq::Agent,
    cache: Option<ResponseCache>,
    requests: AtomicUsize,
}

enum Attempt {
    Done(CachedResponse),
    Retry(QueryError),
}

impl KgClient {
    pub fn new(config: EndpointConfig) -> Result<Self, QueryError> {
        config.validate()?;
        let cache = match &config.cache_path {
            Some(p) => Some(ResponseCache::open(p).map_err(|e| QueryError::Cache(e.to_string()))?),
            None => None,
        };
        Ok(Self::with_cache(config, cache))
    }

    pub fn with_cache(config: EndpointConfig, cache: Option<ResponseCache>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_seconds)))
            .http_status_as_error(false)
            .build()
            .into();
        KgClient { config, agent, cache, requests: AtomicUsize::new(0) }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Network requests issued so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn attempt(&self, query: &str) -> Attempt {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let result = self
            .agent
            .get(&self.config.url)
            .query("query", query)
            .header("Accept", RESULTS_JSON)
            .call();
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(QueryError::Timeout),
            Err(e) => return Attempt::Retry(QueryError::EndpointUnavailable(e.to_string())),
        };
        let status = resp.status().as_u16();
        let mut body = String::new();
        if let Err(e) = resp.body_mut().as_reader().read_to_string(&mut body) {
            return Attempt::Retry(QueryError::EndpointUnavailable(e.to_string()));
        }
        match status {
            200..=299 => Attempt::Done(CachedResponse::Ok(body)),
            408 => Attempt::Retry(QueryError::Timeout),
            429 | 500..=599 => Attempt::Retry(QueryError::EndpointUnavailable(format!("HTTP {status}"))),
            _ => Attempt::Done(CachedResponse::Rejected(format!("HTTP {status}: {}", truncate(&body, 200)))),
        }
    }

    fn fetch(&self, query: &str) -> Result<CachedResponse, QueryError> {
        let mut delay = Duration::from_millis(self.config.retry_backoff_ms);
        let mut attempt = 0;
        loop {
            match self.attempt(query) {
                Attempt::Done(r) => return Ok(r),
                Attempt::Retry(e) if attempt >= self.config.max_retries => return Err(e),
                Attempt::Retry(e) => {
                    log::debug!("retrying after {e} (attempt {})", attempt + 1);
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }

    fn fetch_cached(&self, query: &str) -> Result<CachedResponse, QueryError> {
        let Some(cache) = &self.cache else {
            return self.fetch(query);
        };
        if let Some(hit) = cache.get(query) {
            return Ok(hit);
        }
        let lock = cache.key_lock(query);
        let _guard = lock.lock().unwrap();
        if let Some(hit) = cache.get(query) {
            return Ok(hit);
        }
        let fresh = self.fetch(query)?;
        cache.insert(query, fresh.clone()).map_err(|e| QueryError::Cache(e.to_string()))?;
        Ok(fresh)
    }
}

impl QueryExecutor for KgClient {
    fn execute(&self, query: &str) -> Result<AnswerSet, QueryError> {
        match self.fetch_cached(query)? {
            CachedResponse::Ok(body) => Ok(normalize_answers(&body)?.for_query(query)),
            CachedResponse::Rejected(msg) => Err(QueryError::SyntaxRejected(msg)),
        }
    }

    fn max_concurrent(&self) -> usize {
        self.config.max_concurrent
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
