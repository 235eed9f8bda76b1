use ndarray::{s, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::store::{ContextualEmbeddingStore, KgEmbeddingStore, CONTEXT_DIM, KG_DIM};
use super::EmbeddingError;
use crate::codec::{Provenance, SerializedInput};

/// Width of one input row: contextual part followed by the KG part.
pub const INPUT_DIM: usize = CONTEXT_DIM + KG_DIM;

/// One 968-wide row per serialized input token.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    pub rows: Array2<f64>,
    pub provenance: Vec<Provenance>,
    /// IRIs that had no KG vector and received the 1.0 fill.
    pub kg_misses: Vec<String>,
}

impl InputMatrix {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    /// Forces the KG part of every non-separator row to 1.0.
    pub fn ablate_kg(&mut self) {
        for (i, p) in self.provenance.iter().enumerate() {
            if *p != Provenance::Sep {
                self.rows.slice_mut(s![i, CONTEXT_DIM..]).fill(1.0);
            }
        }
    }
}

pub fn build_input_matrix(
    si: &SerializedInput,
    ctx: &ContextualEmbeddingStore,
    kg: &KgEmbeddingStore,
) -> Result<InputMatrix, EmbeddingError> {
    let record = ctx
        .get(&si.text)
        .ok_or_else(|| EmbeddingError::MissingContextual(si.text.clone()))?;
    let tokens: Vec<&str> = si.tokens().collect();
    if record.len() != tokens.len() {
        return Err(EmbeddingError::TokenCountMismatch { expected: tokens.len(), found: record.len() });
    }
    let mut rows = Array2::<f64>::ones((tokens.len(), INPUT_DIM));
    let mut kg_misses = Vec::new();
    for (i, (tok, prov)) in tokens.iter().zip(&si.provenance).enumerate() {
        if *prov == Provenance::Sep {
            rows.row_mut(i).fill(-1.0);
            continue;
        }
        let mut row = rows.row_mut(i);
        for (dst, src) in row.iter_mut().zip(&record[i]) {
            *dst = f64::from(*src);
        }
        if matches!(prov, Provenance::EntityIri | Provenance::RelationIri) {
            match kg.get(tok) {
                Some(v) => {
                    for (dst, src) in row.slice_mut(s![CONTEXT_DIM..]).iter_mut().zip(v) {
                        *dst = f64::from(*src);
                    }
                }
                None => {
                    log::warn!("no KG vector for {tok}; using 1.0 fill");
                    kg_misses.push(tok.to_string());
                }
            }
        }
    }
    Ok(InputMatrix { rows, provenance: si.provenance.clone(), kg_misses })
}

/// Trainable embedding table, uniform in [-0.1, 0.1].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainableLookup {
    pub table: Array2<f64>,
}

impl TrainableLookup {
    pub fn vocab_size(&self) -> usize {
        self.table.nrows()
    }

    pub fn dim(&self) -> usize {
        self.table.ncols()
    }

    pub fn lookup(&self, id: usize) -> Result<ArrayView1<'_, f64>, EmbeddingError> {
        if id >= self.table.nrows() {
            return Err(EmbeddingError::OutOfRange { id, size: self.table.nrows() });
        }
        Ok(self.table.row(id))
    }
}

pub fn init_trainable_lookup(vocab_size: usize, dim: usize, seed: u64) -> TrainableLookup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = Array2::from_shape_simple_fn((vocab_size, dim), || rng.random_range(-0.1..=0.1));
    TrainableLookup { table }
}
