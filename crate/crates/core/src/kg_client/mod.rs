//! Query execution against a SPARQL endpoint and answer-set comparison.

mod answer;
mod cache;
mod endpoint;
pub mod fixture;

use thiserror::Error;

pub use answer::{answers_equal, canonical_number, normalize_answers, AnswerSet, RdfTerm, Row};
pub use cache::{query_hash, CachedResponse, ResponseCache};
pub use endpoint::{EndpointConfig, KgClient, QueryExecutor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("endpoint rejected the query: {0}")]
    SyntaxRejected(String),
    #[error("endpoint timed out")]
    Timeout,
    #[error("endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("unreadable endpoint response: {0}")]
    Parse(String),
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    #[error("response cache: {0}")]
    Cache(String),
}

impl QueryError {
    /// Errors that mean the endpoint itself is gone, as opposed to a
    /// problem with one query.
    pub fn is_fatal(&self) -> bool {
        matches!(self, QueryError::EndpointUnavailable(_) | QueryError::Config(_) | QueryError::Cache(_))
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::fixture::{FixtureEndpoint, FixtureScript, Reply};
    use super::*;

    const ASK: &str = "ASK WHERE { wd:Q2084454 wdt:P5066 ?obj FILTER(?obj = 22.4) }";

    fn client(url: String) -> KgClient {
        KgClient::new(EndpointConfig { retry_backoff_ms: 5, ..EndpointConfig::new(url) }).unwrap()
    }

    #[test]
    fn ask_select_and_rejection() {
        let fx = FixtureEndpoint::start(
            FixtureScript::new()
                .on(ASK, Reply::boolean(true))
                .on("SELECT ?x WHERE { ?x wdt:P31 wd:Q0 }", Reply::empty("x")),
        )
        .unwrap();
        let c = client(fx.url());
        assert_eq!(c.execute(ASK).unwrap(), AnswerSet::Boolean { value: true });
        assert_eq!(c.execute("SELECT  ?x WHERE { ?x wdt:P31 wd:Q0 }").unwrap(), AnswerSet::Empty);
        assert!(matches!(c.execute("SELEC broken"), Err(QueryError::SyntaxRejected(_))));
    }

    #[test]
    fn transient_failures_are_retried() {
        let fx = FixtureEndpoint::start(FixtureScript::new().on(
            ASK,
            Reply::Flaky { status: 503, times: 2, then: Box::new(Reply::boolean(false)) },
        ))
        .unwrap();
        let c = client(fx.url());
        assert_eq!(c.execute(ASK).unwrap(), AnswerSet::Boolean { value: false });
        assert_eq!(fx.requests_for(ASK), 3);
    }

    #[test]
    fn retries_exhausted() {
        let fx = FixtureEndpoint::start(FixtureScript::new().otherwise(Reply::Status(503))).unwrap();
        let c = client(fx.url());
        assert!(matches!(c.execute(ASK), Err(QueryError::EndpointUnavailable(_))));
        assert_eq!(c.request_count(), 3);
    }

    #[test]
    fn timeout_is_distinct() {
        let fx = FixtureEndpoint::start(
            FixtureScript::new().otherwise(Reply::Delay(Duration::from_millis(600), Box::new(Reply::boolean(true)))),
        )
        .unwrap();
        let cfg = EndpointConfig { timeout_seconds: 0.15, max_retries: 0, ..EndpointConfig::new(fx.url()) };
        let c = KgClient::new(cfg).unwrap();
        assert_eq!(c.execute(ASK), Err(QueryError::Timeout));
    }

    #[test]
    fn unreachable_endpoint() {
        let url = {
            let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            format!("http://{}/sparql", l.local_addr().unwrap())
        };
        let c = KgClient::new(EndpointConfig { max_retries: 1, retry_backoff_ms: 1, ..EndpointConfig::new(url) }).unwrap();
        let err = c.execute(ASK).unwrap_err();
        assert!(err.is_fatal(), "{err:?}");
    }

    #[test]
    fn cache_issues_one_request_per_query() {
        let fx = FixtureEndpoint::start(FixtureScript::new().otherwise(Reply::boolean(true))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = EndpointConfig {
            cache_path: Some(dir.path().join("cache.jsonl")),
            max_concurrent: 8,
            ..EndpointConfig::new(fx.url())
        };
        let c = KgClient::new(cfg.clone()).unwrap();
        let queries: Vec<String> = (0..40).map(|i| format!("ASK {{ wd:Q{} ?p ?o }}", i % 5)).collect();
        let results = c.execute_many(&queries);
        assert!(results.iter().all(|r| *r == Ok(AnswerSet::Boolean { value: true })));
        assert_eq!(fx.request_count(), 5);
        let reopened = KgClient::new(cfg).unwrap();
        assert_eq!(reopened.execute(&queries[0]).unwrap(), AnswerSet::Boolean { value: true });
        assert_eq!(fx.request_count(), 5);
    }

    #[test]
    fn rejections_are_cached() {
        let fx = FixtureEndpoint::start(FixtureScript::new()).unwrap();
        let c = KgClient::with_cache(EndpointConfig::new(fx.url()), Some(ResponseCache::in_memory()));
        for _ in 0..3 {
            assert!(matches!(c.execute("nonsense"), Err(QueryError::SyntaxRejected(_))));
        }
        assert_eq!(fx.request_count(), 1);
    }

    #[test]
    fn execute_many_keeps_order() {
        let mut script = FixtureScript::new();
        for i in 0..12 {
            script.insert(&format!("ASK {{ wd:Q{i} ?p ?o }}"), Reply::boolean(i % 2 == 0));
        }
        let fx = FixtureEndpoint::start(script).unwrap();
        let c = client(fx.url());
        let queries: Vec<String> = (0..12).map(|i| format!("ASK {{ wd:Q{i} ?p ?o }}")).collect();
        for (i, r) in c.execute_many(&queries).into_iter().enumerate() {
            assert_eq!(r.unwrap(), AnswerSet::Boolean { value: i % 2 == 0 });
        }
    }

    #[test]
    fn config_validation() {
        assert!(EndpointConfig { timeout_seconds: 0.0, ..Default::default() }.validate().is_err());
        assert!(EndpointConfig { max_concurrent: 0, ..Default::default() }.validate().is_err());
        assert!(EndpointConfig::new("not a url").validate().is_err());
        EndpointConfig::default().validate().unwrap();
    }
}
