use std::collections::BTreeMap;
use std::path::PathBuf;

use sparqlgen_core::codec::{from_model_tokens, LinkedItem};
use sparqlgen_core::datasets::{
    load_lcquad1, load_lcquad2, make_splits, to_sample, KnowledgeGraph, LabelCache, Lcquad1Options,
};
use sparqlgen_core::sparql::{validate_syntax, SparqlQuery};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn labels() -> BTreeMap<String, String> {
    LabelCache::open(fixture("labels.tsv")).unwrap().to_map()
}

#[test]
fn bundled_lcquad1_loads_and_validates() {
    let (records, report) = load_lcquad1(fixture("lcquad1_sample.json"), &Lcquad1Options::default()).unwrap();
    assert_eq!(report.loaded, 100);
    assert_eq!(report.invalid_query, 0);
    for r in &records {
        let q = SparqlQuery::parse(&r.gold_sparql).unwrap();
        assert!(validate_syntax(&q.tokens).is_ok());
        assert_eq!(r.kg, KnowledgeGraph::DBpedia);
        assert!(!r.entities.is_empty() || !r.relations.is_empty(), "{}", r.id);
    }
}

#[test]
fn bundled_lcquad2_counts_skipped_records() {
    let (records, report) = load_lcquad2(fixture("lcquad2_sample.json")).unwrap();
    assert_eq!(report.total, 102);
    assert_eq!(report.missing_question, 2);
    assert_eq!(records.len(), 100);
}

/// Hand-extracted links for a few fixture records.
#[test]
fn links_match_hand_extraction() {
    let (records, _) = load_lcquad1(fixture("lcquad1_sample.json"), &Lcquad1Options::default()).unwrap();
    let two_hop = records
        .iter()
        .find(|r| r.question.starts_with("Where is the home stadium of Chicago Bulls"))
        .unwrap();
    assert_eq!(
        two_hop.entities,
        [LinkedItem::entity("http://dbpedia.org/resource/Chicago_Bulls", "")]
    );
    let rels: Vec<&str> = two_hop.relations.iter().map(|l| l.iri.as_str()).collect();
    assert_eq!(rels, ["http://dbpedia.org/property/homeStadium", "http://dbpedia.org/ontology/location"]);

    let (records, _) = load_lcquad2(fixture("lcquad2_sample.json")).unwrap();
    let ask = records.iter().find(|r| r.question.contains("22.4")).unwrap();
    assert_eq!(ask.entities, [LinkedItem::entity("wd:Q2084454", "")]);
    assert_eq!(ask.relations, [LinkedItem::relation("wdt:P5066", "")]);
    let qualifier = records.iter().find(|r| r.gold_sparql.contains("pq:P580 ?var0 }")).unwrap();
    let rels: Vec<&str> = qualifier.relations.iter().map(|l| l.iri.as_str()).collect();
    assert_eq!(rels, ["p:P39", "ps:P39", "pq:P580"]);
}

#[test]
fn emitted_targets_render_back_to_gold() {
    let labels = labels();
    let (records, _) = load_lcquad2(fixture("lcquad2_sample.json")).unwrap();
    for r in &records {
        let s = to_sample(&r.with_labels(&labels), 5);
        assert_eq!(s.input_text.matches("[SEP]").count(), 2);
        let tokens: Vec<&str> = s.target_text.split_whitespace().collect();
        let back = SparqlQuery::parse(&from_model_tokens(&tokens)).unwrap();
        assert_eq!(back, r.gold(), "{}", r.id);
    }
}

#[test]
fn fixture_splits_cover_corpus() {
    let (records, _) = load_lcquad1(fixture("lcquad1_sample.json"), &Lcquad1Options::default()).unwrap();
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let plan = make_splits(&ids, 5, 13).unwrap();
    for f in &plan.folds {
        assert_eq!((f.train.len(), f.dev.len(), f.test.len()), (70, 10, 20));
    }
}
