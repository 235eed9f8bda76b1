//! Re-ranking of decoded beams with a binary scorer over the question, the
//! candidate query and its endpoint response.

mod model;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{mean_loss, scorer_tokens, train_reranker, RerankConfig, RerankEpoch, RerankModel};

use crate::checkpoint::CheckpointError;
use crate::eval::EvalItem;
use crate::kg_client::{answers_equal, AnswerSet, QueryError, QueryExecutor, RdfTerm};
use crate::sparql::local_part;

pub const SNIPPET_ROWS: usize = 10;
pub const SNIPPET_CHARS: usize = 512;
/// Beams per question used for training data.
pub const TRAINING_BEAMS: usize = 10;

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("no training samples")]
    Empty,
    #[error("training samples carry a single label")]
    DegenerateData,
    #[error("invalid reranker configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankSample {
    pub question: String,
    pub query: String,
    #[serde(rename = "response")]
    pub response_snippet: String,
    pub label: u8,
}

/// Scores a candidate that produced a valid response; higher is better.
pub trait CandidateScorer: Sync {
    fn score(&self, question: &str, query: &str, answers: &AnswerSet) -> f64;
}

fn term_text(t: &RdfTerm) -> String {
    match t {
        RdfTerm::Iri(i) => local_part(i).to_string(),
        other => other.lexical().to_string(),
    }
}

/// Compact text form of a response: up to ten rows as `var=value`, rows
/// joined by `; `, cut at 512 characters.
pub fn response_snippet(answers: &AnswerSet) -> String {
    let full = match answers {
        AnswerSet::Boolean { value } => value.to_string(),
        AnswerSet::Count { value } => format!("count={value}"),
        AnswerSet::Empty => String::new(),
        AnswerSet::Bindings { rows, .. } => rows
            .iter()
            .take(SNIPPET_ROWS)
            .map(|row| row.iter().map(|(k, v)| format!("{k}={}", term_text(v))).collect::<Vec<_>>().join(", "))
            .collect::<Vec<_>>()
            .join("; "),
    };
    match full.char_indices().nth(SNIPPET_CHARS) {
        Some((i, _)) => full[..i].to_string(),
        None => full,
    }
}

/// New order of candidates: scored ones by descending score, ties and
/// unscored ones kept in original order, unscored after all scored.
pub fn rerank_order(scores: &[Option<f64>]) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|v| (i, if v.is_nan() { f64::NEG_INFINITY } else { v })))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let unscored = scores.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(i, _)| i);
    scored.into_iter().map(|(i, _)| i).chain(unscored).collect()
}

/// A beam with the endpoint's answer, if it gave a valid one.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub query: String,
    pub answers: Option<AnswerSet>,
}

/// Reorders candidates by scorer output.
pub fn rerank(question: &str, candidates: &[Candidate], scorer: &dyn CandidateScorer) -> Vec<Candidate> {
    let scores: Vec<Option<f64>> = candidates
        .iter()
        .map(|c| c.answers.as_ref().filter(|a| a.is_valid()).map(|a| scorer.score(question, &c.query, a)))
        .collect();
    rerank_order(&scores).into_iter().map(|i| candidates[i].clone()).collect()
}

/// Labeled samples from the top beams of each item: every beam with a valid
/// response becomes one sample, labeled 1 iff its answers equal the gold
/// answers. Items whose gold query fails contribute nothing.
pub fn collect_training_data(items: &[EvalItem], exec: &dyn QueryExecutor) -> Result<Vec<RerankSample>, QueryError> {
    let golds: Vec<String> = items.iter().map(|i| i.gold_query.clone()).collect();
    let gold_answers = exec.execute_many(&golds);
    let mut out = Vec::new();
    for (item, gold) in items.iter().zip(gold_answers) {
        let gold = match gold {
            Ok(a) => a,
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => {
                log::warn!("{}: gold query failed: {e}", item.id);
                continue;
            }
        };
        let beams: Vec<String> = item.beams.iter().take(TRAINING_BEAMS).cloned().collect();
        for (query, r) in beams.iter().zip(exec.execute_many(&beams)) {
            match r {
                Ok(a) if a.is_valid() => out.push(RerankSample {
                    question: item.question.clone(),
                    query: query.clone(),
                    response_snippet: response_snippet(&a),
                    label: u8::from(answers_equal(&gold, &a)),
                }),
                Ok(_) => {}
                Err(e) if e.is_fatal() => return Err(e),
                Err(e) => log::debug!("{}: candidate failed: {e}", item.id),
            }
        }
    }
    Ok(out)
}
