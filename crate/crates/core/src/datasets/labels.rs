use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::DatasetError;
use crate::kg_client::{AnswerSet, QueryExecutor, RdfTerm};
use crate::sparql::{local_part, PrefixTable};

/// `iri<TAB>label` cache of knowledge-graph labels.
#[derive(Debug, Clone, Default)]
pub struct LabelCache {
    labels: HashMap<String, String>,
    path: Option<PathBuf>,
}

impl LabelCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref().to_path_buf();
        let mut labels = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| DatasetError::Io { path: path.clone(), source: e })?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                if let Some((iri, label)) = line.split_once('\t') {
                    labels.insert(iri.to_string(), label.to_string());
                }
            }
        }
        Ok(LabelCache { labels, path: Some(path) })
    }

    pub fn get(&self, iri: &str) -> Option<&str> {
        self.labels.get(iri).map(String::as_str)
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.labels.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn insert_all(&mut self, fresh: &BTreeMap<String, String>) -> Result<(), DatasetError> {
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| DatasetError::Io { path: dir.to_path_buf(), source: e })?;
            }
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| DatasetError::Io { path: path.clone(), source: e })?;
            for (iri, label) in fresh {
                writeln!(f, "{iri}\t{}", label.replace(['\t', '\n'], " "))
                    .map_err(|e| DatasetError::Io { path: path.clone(), source: e })?;
            }
        }
        self.labels.extend(fresh.iter().map(|(k, v)| (k.clone(), v.clone())));
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelReport {
    pub labels: BTreeMap<String, String>,
    /// IRIs labeled from their local part because the graph had no label.
    pub fallbacks: BTreeSet<String>,
    /// Lookups answered from the cache.
    pub cache_hits: usize,
}

/// The label query for one IRI. Wikidata property IRIs are looked up on
/// their entity form.
pub fn label_query(iri: &str) -> String {
    let table = PrefixTable::standard();
    let full = match iri.strip_prefix('<').and_then(|i| i.strip_suffix('>')) {
        Some(inner) => inner.to_string(),
        None => table.expand(iri).unwrap_or_else(|_| iri.to_string()),
    };
    let subject = if full.starts_with("http://www.wikidata.org/prop/") {
        format!("http://www.wikidata.org/entity/{}", local_part(&full))
    } else {
        full
    };
    format!(
        "SELECT ?label WHERE {{ <{subject}> <http://www.w3.org/2000/01/rdf-schema#label> ?label FILTER ( LANG ( ?label ) = \"en\" ) }} LIMIT 1"
    )
}

/// Local part with underscores as spaces.
pub fn fallback_label(iri: &str) -> String {
    local_part(iri).replace('_', " ")
}

/// English labels for `iris`, from the cache where possible. Failed or empty
/// lookups fall back to the local part and are flagged, not cached.
pub fn fetch_labels(iris: &[String], exec: &dyn QueryExecutor, cache: &mut LabelCache) -> Result<LabelReport, DatasetError> {
    let mut report = LabelReport::default();
    let mut missing: Vec<String> = Vec::new();
    for iri in iris.iter().collect::<BTreeSet<_>>() {
        match cache.get(iri) {
            Some(l) => {
                report.labels.insert(iri.clone(), l.to_string());
                report.cache_hits += 1;
            }
            None => missing.push(iri.clone()),
        }
    }
    let queries: Vec<String> = missing.iter().map(|i| label_query(i)).collect();
    let mut fresh = BTreeMap::new();
    for (iri, r) in missing.iter().zip(exec.execute_many(&queries)) {
        let label = match r {
            Ok(AnswerSet::Bindings { rows, .. }) => rows.iter().find_map(|row| match row.get("label") {
                Some(RdfTerm::Literal { value, .. }) => Some(value.clone()),
                Some(other) => Some(other.lexical().to_string()),
                None => None,
            }),
            Ok(_) => None,
            Err(e) if e.is_fatal() => {
                log::warn!("{iri}: label lookup failed: {e}");
                None
            }
            Err(e) => {
                log::debug!("{iri}: label lookup failed: {e}");
                None
            }
        };
        match label {
            Some(l) => {
                fresh.insert(iri.clone(), l.clone());
                report.labels.insert(iri.clone(), l);
            }
            None => {
                report.labels.insert(iri.clone(), fallback_label(iri));
                report.fallbacks.insert(iri.clone());
            }
        }
    }
    cache.insert_all(&fresh)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg_client::fixture::{lang_literal, FixtureEndpoint, FixtureScript, Reply};
    use crate::kg_client::{EndpointConfig, KgClient};

    #[test]
    fn fetches_falls_back_and_caches() {
        let fx = FixtureEndpoint::start(
            FixtureScript::new()
                .on(&label_query("wd:Q76"), Reply::select(&["label"], vec![vec![lang_literal("Barack Obama", "en")]]))
                .on(&label_query("wdt:P26"), Reply::select(&["label"], vec![vec![lang_literal("spouse", "en")]]))
                .otherwise(Reply::empty("label")),
        )
        .unwrap();
        let client = KgClient::new(EndpointConfig::new(fx.url())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.tsv");
        let mut cache = LabelCache::open(&path).unwrap();
        let iris: Vec<String> =
            ["wd:Q76", "wdt:P26", "http://dbpedia.org/resource/Cold_Lake"].map(String::from).to_vec();
        let r = fetch_labels(&iris, &client, &mut cache).unwrap();
        assert_eq!(r.labels["wd:Q76"], "Barack Obama");
        assert_eq!(r.labels["wdt:P26"], "spouse");
        assert_eq!(r.labels["http://dbpedia.org/resource/Cold_Lake"], "Cold Lake");
        assert!(r.fallbacks.contains("http://dbpedia.org/resource/Cold_Lake"));
        assert_eq!(fx.request_count(), 3);

        let mut reopened = LabelCache::open(&path).unwrap();
        let again = fetch_labels(&iris[..2], &client, &mut reopened).unwrap();
        assert_eq!(again.cache_hits, 2);
        assert_eq!(fx.request_count(), 3);
    }

    #[test]
    fn property_labels_use_entity_form() {
        assert!(label_query("wdt:P26").contains("<http://www.wikidata.org/entity/P26>"));
        assert!(label_query("http://dbpedia.org/ontology/spouse").contains("<http://dbpedia.org/ontology/spouse>"));
    }
}
