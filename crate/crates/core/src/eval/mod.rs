//! Execution-based evaluation: first valid beam, answer-level F1, error
//! categories and answerability filtering.

mod copy;
mod taxonomy;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use copy::{copy_required, literal_lexical, question_words};
pub use taxonomy::{categorize_error, edit_distance, ErrorCategory, MORPH_DISTANCE};

use crate::codec::LinkedItem;
use crate::kg_client::{answers_equal, AnswerSet, QueryError, QueryExecutor};
use crate::reranker::{rerank_order, CandidateScorer};
use crate::sparql::SparqlQuery;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation aborted after {completed} questions: {source}")]
    Aborted {
        completed: usize,
        partial: Box<EvalReport>,
        #[source]
        source: QueryError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One question with the system's decoded beams in rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub question: String,
    pub gold_query: String,
    #[serde(default)]
    pub linked: Vec<LinkedItem>,
    pub beams: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn all(v: f64) -> Self {
        Prf { precision: v, recall: v, f1: v }
    }
}

/// Answer-level precision, recall and F1 of one question. Booleans and
/// counts score 1 or 0; a missing system answer or a kind mismatch scores 0.
pub fn score_answers(gold: &AnswerSet, system: Option<&AnswerSet>) -> Prf {
    let Some(system) = system else {
        return Prf::default();
    };
    match (gold, system) {
        (AnswerSet::Boolean { .. }, _) | (_, AnswerSet::Boolean { .. }) | (AnswerSet::Count { .. }, _) => {
            Prf::all(if answers_equal(gold, system) { 1.0 } else { 0.0 })
        }
        _ => {
            let g = gold.elements();
            let s = system.elements();
            let hit = g.intersection(&s).count() as f64;
            if hit == 0.0 {
                return Prf::default();
            }
            let precision = hit / s.len() as f64;
            let recall = hit / g.len() as f64;
            Prf { precision, recall, f1: 2.0 * precision * recall / (precision + recall) }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub gold_query: String,
    pub gold_answers: Option<AnswerSet>,
    pub beams: Vec<String>,
    /// Original rank of the beam taken as system output.
    pub chosen_rank: Option<usize>,
    pub system_answers: Option<AnswerSet>,
    #[serde(rename = "match")]
    pub is_match: bool,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub category: Option<ErrorCategory>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub questions: usize,
    pub answered: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub exact_match: f64,
}

impl EvalSummary {
    pub fn from_records(records: &[EvalRecord]) -> Self {
        let n = records.len();
        if n == 0 {
            return EvalSummary::default();
        }
        let mean = |f: fn(&EvalRecord) -> f64| records.iter().map(f).sum::<f64>() / n as f64;
        EvalSummary {
            questions: n,
            answered: records.iter().filter(|r| r.chosen_rank.is_some()).count(),
            precision: mean(|r| r.precision),
            recall: mean(|r| r.recall),
            f1: mean(|r| r.f1),
            exact_match: mean(|r| if r.is_match { 1.0 } else { 0.0 }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub summary: EvalSummary,
    pub records: Vec<EvalRecord>,
}

impl EvalReport {
    pub fn error_breakdown(&self) -> BTreeMap<ErrorCategory, usize> {
        error_breakdown(&self.records)
    }
}

pub fn error_breakdown(records: &[EvalRecord]) -> BTreeMap<ErrorCategory, usize> {
    let mut counts = BTreeMap::new();
    for c in records.iter().filter_map(|r| r.category) {
        *counts.entry(c).or_default() += 1;
    }
    counts
}

/// Plain-text table of category counts and shares.
pub fn format_breakdown(counts: &BTreeMap<ErrorCategory, usize>) -> String {
    let total: usize = counts.values().sum();
    let mut out = format!("{:<16} {:>6} {:>7}\n", "Category", "Count", "Share");
    for c in ErrorCategory::ALL {
        let n = counts.get(&c).copied().unwrap_or(0);
        let share = if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
        out.push_str(&format!("{:<16} {:>6} {:>6.1}%\n", c.label(), n, share));
    }
    out.push_str(&format!("{:<16} {:>6}\n", "Total", total));
    out
}

fn classify(errors: Vec<Result<AnswerSet, QueryError>>) -> Result<Vec<Option<AnswerSet>>, QueryError> {
    errors
        .into_iter()
        .map(|r| match r {
            Ok(a) => Ok(Some(a)),
            Err(e) if e.is_fatal() => Err(e),
            Err(e) => {
                log::debug!("beam failed: {e}");
                Ok(None)
            }
        })
        .collect()
}

/// Picks the system output of one question: with a scorer, all beams are
/// executed and the best-scored valid one wins; otherwise beams run in rank
/// order until the first valid response.
fn choose(
    item: &EvalItem,
    exec: &dyn QueryExecutor,
    scorer: Option<&dyn CandidateScorer>,
) -> Result<Option<(usize, AnswerSet)>, QueryError> {
    match scorer {
        None => {
            for (rank, beam) in item.beams.iter().enumerate() {
                match exec.execute(beam) {
                    Ok(a) if a.is_valid() => return Ok(Some((rank, a))),
                    Ok(_) => {}
                    Err(e) if e.is_fatal() => return Err(e),
                    Err(e) => log::debug!("{}: beam {rank} failed: {e}", item.id),
                }
            }
            Ok(None)
        }
        Some(scorer) => {
            let responses = classify(exec.execute_many(&item.beams))?;
            let scores: Vec<Option<f64>> = item
                .beams
                .iter()
                .zip(&responses)
                .map(|(q, r)| r.as_ref().filter(|a| a.is_valid()).map(|a| scorer.score(&item.question, q, a)))
                .collect();
            let order = rerank_order(&scores);
            Ok(order
                .into_iter()
                .find(|&i| scores[i].is_some())
                .map(|i| (i, responses[i].clone().expect("scored beams have responses"))))
        }
    }
}

fn evaluate_one(
    item: &EvalItem,
    gold: Option<AnswerSet>,
    exec: &dyn QueryExecutor,
    scorer: Option<&dyn CandidateScorer>,
) -> Result<EvalRecord, QueryError> {
    let chosen = choose(item, exec, scorer)?;
    let prf = match &gold {
        Some(g) => score_answers(g, chosen.as_ref().map(|(_, a)| a)),
        None => Prf::default(),
    };
    let is_match = matches!((&gold, &chosen), (Some(g), Some((_, a))) if answers_equal(g, a));
    let category = if is_match {
        None
    } else {
        let pred = chosen.as_ref().map(|(r, _)| *r).or(if item.beams.is_empty() { None } else { Some(0) });
        match (SparqlQuery::parse(&item.gold_query), pred) {
            (Ok(g), Some(r)) => Some(categorize_error(&g, &item.beams[r], &item.linked, &item.question)),
            _ => None,
        }
    };
    Ok(EvalRecord {
        id: item.id.clone(),
        gold_query: item.gold_query.clone(),
        gold_answers: gold,
        beams: item.beams.clone(),
        chosen_rank: chosen.as_ref().map(|(r, _)| *r),
        system_answers: chosen.map(|(_, a)| a),
        is_match,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        category,
    })
}

/// Runs the evaluation protocol. Each record is written to `sink` as soon as
/// it is complete, followed by a summary line; an unavailable endpoint stops
/// the run and the records written so far remain.
pub fn evaluate(
    items: &[EvalItem],
    exec: &dyn QueryExecutor,
    scorer: Option<&dyn CandidateScorer>,
    mut sink: Option<&mut dyn Write>,
) -> Result<EvalReport, EvalError> {
    let golds: Vec<String> = items.iter().map(|i| i.gold_query.clone()).collect();
    let gold_answers = exec.execute_many(&golds);
    let mut records = Vec::with_capacity(items.len());
    for (item, gold) in items.iter().zip(gold_answers) {
        let gold = match gold {
            Ok(a) => Some(a),
            Err(e) if e.is_fatal() => return Err(abort(records, e)),
            Err(e) => {
                log::warn!("{}: gold query failed: {e}", item.id);
                None
            }
        };
        let record = match evaluate_one(item, gold, exec, scorer) {
            Ok(r) => r,
            Err(e) => return Err(abort(records, e)),
        };
        if let Some(w) = sink.as_deref_mut() {
            writeln!(w, "{}", serde_json::to_string(&record).expect("records serialize"))?;
            w.flush()?;
        }
        records.push(record);
    }
    let summary = EvalSummary::from_records(&records);
    if let Some(w) = sink {
        writeln!(w, "{}", serde_json::json!({ "summary": summary }))?;
        w.flush()?;
    }
    Ok(EvalReport { summary, records })
}

fn abort(records: Vec<EvalRecord>, source: QueryError) -> EvalError {
    let completed = records.len();
    let summary = EvalSummary::from_records(&records);
    EvalError::Aborted { completed, partial: Box::new(EvalReport { summary, records }), source }
}

/// Keeps the IDs whose gold query yields a valid response, in input order,
/// and optionally writes them one per line. Per-query failures exclude the
/// question; an unavailable endpoint stops the run.
pub fn filter_answerable(
    gold: &[(String, String)],
    exec: &dyn QueryExecutor,
    kept_ids_path: Option<&Path>,
) -> Result<Vec<String>, QueryError> {
    let queries: Vec<String> = gold.iter().map(|(_, q)| q.clone()).collect();
    let mut kept = Vec::new();
    for ((id, _), r) in gold.iter().zip(exec.execute_many(&queries)) {
        match r {
            Ok(a) if a.is_valid() => kept.push(id.clone()),
            Ok(_) => log::info!("{id}: gold query has no answer"),
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => log::warn!("{id}: gold query failed: {e}"),
        }
    }
    if let Some(path) = kept_ids_path {
        let mut text = kept.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| QueryError::Cache(format!("writing {}: {e}", path.display())))?;
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeSet, HashMap};
    use std::sync::Mutex;

    use super::*;
    use crate::kg_client::{RdfTerm, Row};

    fn iris(xs: &[&str]) -> AnswerSet {
        AnswerSet::Bindings {
            vars: BTreeSet::from(["x".to_string()]),
            rows: xs.iter().map(|x| Row::from([("x".to_string(), RdfTerm::Iri(x.to_string()))])).collect(),
        }
    }

    /// In-process executor with a call log.
    struct Scripted {
        answers: HashMap<String, Result<AnswerSet, QueryError>>,
        calls: Mutex<Vec<String>>,
    }

    impl Scripted {
        fn new(pairs: Vec<(&str, Result<AnswerSet, QueryError>)>) -> Self {
            Scripted {
                answers: pairs.into_iter().map(|(q, a)| (q.to_string(), a)).collect(),
                calls: Mutex::default(),
            }
        }
    }

    impl QueryExecutor for Scripted {
        fn execute(&self, query: &str) -> Result<AnswerSet, QueryError> {
            self.calls.lock().unwrap().push(query.to_string());
            self.answers.get(query).cloned().unwrap_or(Err(QueryError::SyntaxRejected("unscripted".into())))
        }
    }

    #[test]
    fn partial_overlap_scores_two_thirds() {
        let p = score_answers(&iris(&["A", "B"]), Some(&iris(&["A"])));
        assert_eq!(p.precision, 1.0);
        assert_eq!(p.recall, 0.5);
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(score_answers(&iris(&["A"]), Some(&iris(&["A"]))).f1, 1.0);
        assert_eq!(score_answers(&iris(&["A"]), None).f1, 0.0);
        assert_eq!(score_answers(&AnswerSet::Boolean { value: true }, Some(&iris(&["A"]))).f1, 0.0);
        assert_eq!(score_answers(&AnswerSet::Boolean { value: false }, Some(&AnswerSet::Boolean { value: false })).f1, 1.0);
    }

    #[test]
    fn first_valid_beam_wins() {
        let exec = Scripted::new(vec![
            ("gold", Ok(iris(&["A", "B"]))),
            ("b0", Err(QueryError::SyntaxRejected("bad".into()))),
            ("b1", Ok(AnswerSet::Empty)),
            ("b2", Ok(iris(&["A"]))),
            ("b3", Ok(iris(&["A", "B"]))),
        ]);
        let item = EvalItem {
            id: "q1".into(),
            question: "q".into(),
            gold_query: "gold".into(),
            linked: vec![],
            beams: ["b0", "b1", "b2", "b3"].map(String::from).to_vec(),
        };
        let report = evaluate(&[item], &exec, None, None).unwrap();
        let r = &report.records[0];
        assert_eq!(r.chosen_rank, Some(2));
        assert!(!r.is_match);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!(!exec.calls.lock().unwrap().contains(&"b3".to_string()));
    }

    #[test]
    fn no_valid_beam_scores_zero() {
        let exec = Scripted::new(vec![("gold", Ok(iris(&["A"]))), ("b0", Ok(AnswerSet::Empty))]);
        let item = EvalItem {
            id: "q".into(),
            question: "q".into(),
            gold_query: "gold".into(),
            linked: vec![],
            beams: vec!["b0".into()],
        };
        let report = evaluate(&[item], &exec, None, None).unwrap();
        assert_eq!(report.records[0].chosen_rank, None);
        assert_eq!(report.summary.f1, 0.0);
        assert_eq!(report.summary.answered, 0);
    }

    #[test]
    fn unavailable_endpoint_aborts_with_partial_results() {
        let exec = Scripted::new(vec![
            ("g1", Ok(iris(&["A"]))),
            ("g2", Ok(iris(&["A"]))),
            ("a", Ok(iris(&["A"]))),
            ("down", Err(QueryError::EndpointUnavailable("gone".into()))),
        ]);
        let mk = |id: &str, gold: &str, beam: &str| EvalItem {
            id: id.into(),
            question: String::new(),
            gold_query: gold.into(),
            linked: vec![],
            beams: vec![beam.into()],
        };
        let mut sink = Vec::new();
        let err = evaluate(&[mk("1", "g1", "a"), mk("2", "g2", "down")], &exec, None, Some(&mut sink)).unwrap_err();
        match err {
            EvalError::Aborted { completed, partial, .. } => {
                assert_eq!(completed, 1);
                assert_eq!(partial.summary.f1, 1.0);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(String::from_utf8(sink).unwrap().lines().count(), 1);
    }

    #[test]
    fn filtering_keeps_answerable() {
        let exec = Scripted::new(vec![
            ("g1", Ok(iris(&["A"]))),
            ("g2", Ok(AnswerSet::Empty)),
            ("g3", Ok(AnswerSet::Boolean { value: false })),
            ("g4", Ok(AnswerSet::Empty)),
            ("g5", Ok(iris(&["B"]))),
        ]);
        let gold: Vec<(String, String)> = (1..=5).map(|i| (format!("id{i}"), format!("g{i}"))).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kept.txt");
        let kept = filter_answerable(&gold, &exec, Some(&path)).unwrap();
        assert_eq!(kept, ["id1", "id3", "id5"]);
        assert_eq!(std::fs::read_to_string(path).unwrap(), "id1\nid3\nid5\n");
    }

    #[test]
    fn macro_f1_ignores_order() {
        let rec = |f1: f64| EvalRecord {
            id: String::new(),
            gold_query: String::new(),
            gold_answers: None,
            beams: vec![],
            chosen_rank: None,
            system_answers: None,
            is_match: false,
            precision: f1,
            recall: f1,
            f1,
            category: None,
        };
        let a = [rec(1.0), rec(0.0), rec(2.0 / 3.0)];
        let b = [rec(2.0 / 3.0), rec(1.0), rec(0.0)];
        let sa = EvalSummary::from_records(&a);
        assert!((sa.f1 - 5.0 / 9.0).abs() < 1e-12);
        assert!((sa.f1 - EvalSummary::from_records(&b).f1).abs() < 1e-15);
    }

    #[test]
    fn breakdown_table_lists_every_category() {
        let counts = BTreeMap::from([(ErrorCategory::TripleFlip, 3), (ErrorCategory::Other, 1)]);
        let table = format_breakdown(&counts);
        assert_eq!(table.lines().count(), ErrorCategory::ALL.len() + 2);
        assert!(table.contains("Triple flip"));
        assert!(table.contains("75.0%"));
    }
}
