use std::collections::HashSet;

use super::KnowledgeGraph;
use crate::codec::{build_sentinel_table, CodecError, LinkedItem, SentinelTable};
use crate::sparql::{
    canonicalize, contract_prefixes, expand_prefixes, iri_of, PrefixTable, SparqlError, SparqlQuery, SparqlVocabulary,
};

const ENTITY_NAMESPACES: &[&str] = &["http://dbpedia.org/resource/", "http://www.wikidata.org/entity/"];

const RELATION_NAMESPACES: &[&str] = &[
    "http://dbpedia.org/ontology/",
    "http://dbpedia.org/property/",
    "http://www.wikidata.org/prop/direct/",
    "http://www.wikidata.org/prop/statement/",
    "http://www.wikidata.org/prop/qualifier/",
    "http://www.wikidata.org/prop/",
];

/// Namespaces whose terms are structural rather than linked items.
const QUIET_NAMESPACES: &[&str] = &[
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "http://www.w3.org/2000/01/rdf-schema#",
    "http://www.w3.org/2001/XMLSchema#",
];

impl KnowledgeGraph {
    pub fn prefixes(self) -> PrefixTable {
        match self {
            KnowledgeGraph::DBpedia => PrefixTable::dbpedia(),
            KnowledgeGraph::Wikidata => PrefixTable::wikidata(),
        }
    }

    /// Sentinel table matching the normalized gold form: namespaces for
    /// DBpedia's full IRIs, prefix labels for Wikidata.
    pub fn sentinel_table(self, vocab: &SparqlVocabulary) -> Result<SentinelTable, CodecError> {
        let table = self.prefixes();
        let prefixes: Vec<&str> = match self {
            KnowledgeGraph::DBpedia => table.iter().map(|(_, ns)| ns).collect(),
            KnowledgeGraph::Wikidata => table.iter().map(|(p, _)| p).collect(),
        };
        build_sentinel_table(prefixes, vocab.iter())
    }
}

/// Parses a dataset query and brings it to the form used as a training
/// target: full IRIs for DBpedia, prefixed names for Wikidata, canonical
/// variable names for both.
pub fn normalize_gold(sparql: &str, kg: KnowledgeGraph) -> Result<SparqlQuery, SparqlError> {
    let table = PrefixTable::standard();
    let q = SparqlQuery::parse_with(sparql, &table)?;
    let q = match kg {
        KnowledgeGraph::DBpedia => expand_prefixes(&q, &table)?,
        KnowledgeGraph::Wikidata => contract_prefixes(&q, &kg.prefixes()),
    };
    Ok(canonicalize(&q))
}

/// Entities and relations of a gold query in order of first occurrence,
/// without labels. IRIs outside the known namespaces are classified by
/// whether they ever occupy a predicate slot.
pub fn extract_gold_links(gold: &SparqlQuery, kg: KnowledgeGraph) -> (Vec<LinkedItem>, Vec<LinkedItem>) {
    let table = PrefixTable::standard();
    let predicates: HashSet<String> = gold
        .triples
        .iter()
        .filter_map(|t| match &t.predicate {
            crate::sparql::Term::Iri(i) => Some(full(i, &table)),
            _ => None,
        })
        .collect();
    let kg_table = kg.prefixes();
    let mut seen = HashSet::new();
    let (mut entities, mut relations) = (Vec::new(), Vec::new());
    for tok in gold.iris() {
        let Some(iri) = iri_of(tok, &table) else { continue };
        if !seen.insert(iri.clone()) {
            continue;
        }
        let shown = match kg {
            KnowledgeGraph::DBpedia => iri.clone(),
            KnowledgeGraph::Wikidata => kg_table.contract(&iri).unwrap_or_else(|| iri.clone()),
        };
        if ENTITY_NAMESPACES.iter().any(|ns| iri.starts_with(ns)) {
            entities.push(LinkedItem::entity(shown, ""));
        } else if RELATION_NAMESPACES.iter().any(|ns| iri.starts_with(ns)) {
            relations.push(LinkedItem::relation(shown, ""));
        } else {
            let predicate = predicates.contains(&iri);
            if QUIET_NAMESPACES.iter().any(|ns| iri.starts_with(ns)) {
                log::debug!("{iri}: structural namespace, classified by position");
            } else {
                log::warn!("{iri}: unknown namespace, classified by position");
            }
            if predicate {
                relations.push(LinkedItem::relation(shown, ""));
            } else {
                entities.push(LinkedItem::entity(shown, ""));
            }
        }
    }
    (entities, relations)
}

fn full(text: &str, table: &PrefixTable) -> String {
    match text.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
        Some(inner) => inner.to_string(),
        None => table.expand(text).unwrap_or_else(|_| text.to_string()),
    }
}
