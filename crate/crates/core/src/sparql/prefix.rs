use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PrefixError {
    #[error("line {line}: expected `prefix<TAB>namespace`")]
    Parse { line: usize },
    #[error("prefix `{0}` must end with ':'")]
    MissingColon(String),
    #[error("prefix `{0}` declared twice")]
    DuplicatePrefix(String),
    #[error("namespace <{namespace}> already bound to `{existing}`")]
    DuplicateNamespace { namespace: String, existing: String },
    #[error("unknown prefix `{0}`")]
    UnknownPrefix(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Injective map from prefix labels (`wdt:`) to namespace IRIs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrefixTable {
    entries: BTreeMap<String, String>,
}

const WIKIDATA: &[(&str, &str)] = &[
    ("wd:", "http://www.wikidata.org/entity/"),
    ("wds:", "http://www.wikidata.org/entity/statement/"),
    ("wdv:", "http://www.wikidata.org/value/"),
    ("wdt:", "http://www.wikidata.org/prop/direct/"),
    ("wikibase:", "http://wikiba.se/ontology#"),
    ("p:", "http://www.wikidata.org/prop/"),
    ("ps:", "http://www.wikidata.org/prop/statement/"),
    ("pq:", "http://www.wikidata.org/prop/qualifier/"),
    ("psv:", "http://www.wikidata.org/prop/statement/value/"),
    ("psn:", "http://www.wikidata.org/prop/statement/value-normalized/"),
    ("pqv:", "http://www.wikidata.org/prop/qualifier/value/"),
    ("pqn:", "http://www.wikidata.org/prop/qualifier/value-normalized/"),
    ("pr:", "http://www.wikidata.org/prop/reference/"),
    ("prv:", "http://www.wikidata.org/prop/reference/value/"),
    ("prn:", "http://www.wikidata.org/prop/reference/value-normalized/"),
    ("wdno:", "http://www.wikidata.org/prop/novalue/"),
    ("wdref:", "http://www.wikidata.org/reference/"),
    ("wdata:", "http://www.wikidata.org/wiki/Special:EntityData/"),
    ("bd:", "http://www.bigdata.com/rdf#"),
    ("bds:", "http://www.bigdata.com/rdf/search#"),
    ("gas:", "http://www.bigdata.com/rdf/gas#"),
    ("hint:", "http://www.bigdata.com/queryHints#"),
    ("schema:", "http://schema.org/"),
    ("prov:", "http://www.w3.org/ns/prov#"),
];

const DBPEDIA: &[(&str, &str)] = &[
    ("dbr:", "http://dbpedia.org/resource/"),
    ("dbc:", "http://dbpedia.org/resource/Category:"),
    ("dbo:", "http://dbpedia.org/ontology/"),
    ("dbp:", "http://dbpedia.org/property/"),
    ("yago:", "http://dbpedia.org/class/yago/"),
    ("foaf:", "http://xmlns.com/foaf/0.1/"),
    ("dct:", "http://purl.org/dc/terms/"),
];

const COMMON: &[(&str, &str)] = &[
    ("rdf:", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
    ("rdfs:", "http://www.w3.org/2000/01/rdf-schema#"),
    ("xsd:", "http://www.w3.org/2001/XMLSchema#"),
    ("owl:", "http://www.w3.org/2002/07/owl#"),
    ("skos:", "http://www.w3.org/2004/02/skos/core#"),
];

impl PrefixTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn from_static(groups: &[&[(&str, &str)]]) -> Self {
        let mut t = Self::new();
        for group in groups {
            for (p, ns) in group.iter() {
                t.insert(p, ns).expect("built-in prefix tables are injective");
            }
        }
        t
    }

    /// Wikidata Query Service prefixes plus the W3C vocabularies.
    pub fn wikidata() -> Self {
        Self::from_static(&[WIKIDATA, COMMON])
    }

    pub fn dbpedia() -> Self {
        Self::from_static(&[DBPEDIA, COMMON])
    }

    /// Union of the Wikidata and DBpedia tables.
    pub fn standard() -> Self {
        Self::from_static(&[WIKIDATA, DBPEDIA, COMMON])
    }

    pub fn insert(&mut self, prefix: &str, namespace: &str) -> Result<(), PrefixError> {
        if !prefix.ends_with(':') {
            return Err(PrefixError::MissingColon(prefix.to_string()));
        }
        if self.entries.contains_key(prefix) {
            return Err(PrefixError::DuplicatePrefix(prefix.to_string()));
        }
        if let Some((existing, _)) = self.entries.iter().find(|(_, ns)| *ns == namespace) {
            return Err(PrefixError::DuplicateNamespace {
                namespace: namespace.to_string(),
                existing: existing.clone(),
            });
        }
        self.entries.insert(prefix.to_string(), namespace.to_string());
        Ok(())
    }

    pub fn namespace(&self, prefix: &str) -> Option<&str> {
        self.entries.get(prefix).map(String::as_str)
    }

    pub fn contains_prefix(&self, prefix: &str) -> bool {
        self.entries.contains_key(prefix)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(p, ns)| (p.as_str(), ns.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `wdt:P31` -> `http://www.wikidata.org/prop/direct/P31`.
    pub fn expand(&self, pname: &str) -> Result<String, PrefixError> {
        let colon = pname.find(':').ok_or_else(|| PrefixError::UnknownPrefix(pname.to_string()))?;
        let (prefix, local) = pname.split_at(colon + 1);
        let ns = self
            .namespace(prefix)
            .ok_or_else(|| PrefixError::UnknownPrefix(prefix.to_string()))?;
        Ok(format!("{ns}{local}"))
    }

    /// Compacts a bare IRI using the longest matching namespace whose remainder
    /// is a legal local name.
    pub fn contract(&self, iri: &str) -> Option<String> {
        self.entries
            .iter()
            .filter(|(_, ns)| iri.starts_with(ns.as_str()))
            .max_by_key(|(_, ns)| ns.len())
            .and_then(|(p, ns)| {
                let local = &iri[ns.len()..];
                is_pn_local(local).then(|| format!("{p}{local}"))
            })
    }

    /// Longest namespace that `iri` starts with.
    pub fn split_iri<'a>(&self, iri: &'a str) -> Option<(&str, &'a str)> {
        self.entries
            .iter()
            .filter(|(_, ns)| iri.starts_with(ns.as_str()))
            .max_by_key(|(_, ns)| ns.len())
            .map(|(p, ns)| (p.as_str(), &iri[ns.len()..]))
    }

    pub fn from_tsv(text: &str) -> Result<Self, PrefixError> {
        let mut t = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(p), Some(ns), None) if !p.is_empty() && !ns.is_empty() => t.insert(p, ns)?,
                _ => return Err(PrefixError::Parse { line: i + 1 }),
            }
        }
        Ok(t)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# prefix\tnamespace\n");
        for (p, ns) in self.iter() {
            let _ = writeln!(out, "{p}\t{ns}");
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PrefixError> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PrefixError> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }
}

/// Conservative PN_LOCAL check: letters, digits, `_`, `-`, `.` (not last).
pub(crate) fn is_pn_local(local: &str) -> bool {
    !local.is_empty()
        && !local.ends_with('.')
        && !local.starts_with('.')
        && !local.starts_with('-')
        && local
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}
