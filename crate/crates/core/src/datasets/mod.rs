//! Dataset loading, gold link extraction, labels, splits and emission of
//! serialized training samples.

mod labels;
mod links;
mod load;
mod splits;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use labels::{fallback_label, fetch_labels, label_query, LabelCache, LabelReport};
pub use links::{extract_gold_links, normalize_gold};
pub use load::{load_lcquad1, load_lcquad2, read_id_list, Lcquad1Options, LoadReport, QuestionField};
pub use splits::{fixed_test_split, make_splits, Fold, SplitPlan, DEV_RATIO, MAX_FOLDS};

use crate::codec::{serialize_input, to_model_tokens, LinkedItem, SampleRecord};
use crate::pgn::{ExtendedVocab, FixedVocab};
use crate::sparql::SparqlQuery;

/// Record counts of the official releases.
pub const LCQUAD1_SUBSET_SIZE: usize = 3253;
pub const LCQUAD2_TRAIN_SIZE: usize = 24180;
pub const LCQUAD2_TEST_SIZE: usize = 6046;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Schema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KnowledgeGraph {
    DBpedia,
    Wikidata,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub question: String,
    /// Normalized gold query.
    pub gold_sparql: String,
    pub kg: KnowledgeGraph,
    pub entities: Vec<LinkedItem>,
    pub relations: Vec<LinkedItem>,
}

impl QuestionRecord {
    pub fn gold(&self) -> SparqlQuery {
        SparqlQuery::parse(&self.gold_sparql).expect("loaded gold queries are valid")
    }

    /// Every linked IRI, entities first.
    pub fn linked_iris(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().chain(&self.relations).map(|l| l.iri.as_str())
    }

    /// Copy of the record with labels filled from `labels`, falling back to
    /// the IRI local part.
    pub fn with_labels(&self, labels: &BTreeMap<String, String>) -> QuestionRecord {
        let fill = |items: &[LinkedItem]| -> Vec<LinkedItem> {
            items
                .iter()
                .map(|l| LinkedItem {
                    label: labels.get(&l.iri).cloned().unwrap_or_else(|| fallback_label(&l.iri)),
                    ..l.clone()
                })
                .collect()
        };
        QuestionRecord { entities: fill(&self.entities), relations: fill(&self.relations), ..self.clone() }
    }

    pub fn linked(&self) -> Vec<LinkedItem> {
        self.entities.iter().chain(&self.relations).cloned().collect()
    }
}

/// Per-sample shuffle seed derived from the corpus seed and the record ID.
pub fn sample_seed(seed: u64, id: &str) -> u64 {
    let digest = Sha256::digest(id.as_bytes());
    seed ^ u64::from_le_bytes(digest[..8].try_into().expect("digest has 8 bytes"))
}

/// Serialized input and model-token target of one labeled record.
pub fn to_sample(record: &QuestionRecord, seed: u64) -> SampleRecord {
    let input = serialize_input(&record.question, &record.entities, &record.relations, sample_seed(seed, &record.id));
    SampleRecord {
        id: record.id.clone(),
        input_text: input.text,
        target_text: to_model_tokens(&record.gold()).join(" "),
    }
}

/// Target tokens of `sample` that are neither in `fixed` nor copyable from
/// its input.
pub fn uncoverable_tokens(fixed: &FixedVocab, sample: &SampleRecord) -> Vec<String> {
    let input: Vec<&str> = sample.input_text.split_whitespace().collect();
    let ext = ExtendedVocab::new(fixed, &input);
    let mut out: Vec<String> =
        sample.target_text.split_whitespace().filter(|t| ext.id(t).is_none()).map(str::to_string).collect();
    out.dedup();
    out
}
