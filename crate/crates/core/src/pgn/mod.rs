//! LSTM pointer-generator network: bidirectional encoder, attentive decoder
//! with input feeding, and a gate mixing vocabulary generation with copying
//! input tokens.

mod beam;
mod config;
mod model;
mod train;
mod vocab;

use thiserror::Error;

pub use beam::{beam_search, greedy_decode, Beam};
pub use config::PgnConfig;
pub use model::{
    final_distribution, DecoderState, EncoderInput, EncoderStates, Example, InputSpec, PgnModel, PgnSample,
    StepOutput,
};
pub use train::{train, EpochLog};
pub use vocab::{
    copy_form, ExtendedVocab, FixedVocab, InputVocab, CANONICAL_VARIABLES, END, END_ID, PAD, PAD_ID, SEP_ID,
    START, START_ID, UNK,
};

use crate::checkpoint::CheckpointError;

#[derive(Debug, Error)]
pub enum PgnError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("sample {sample_id}: target token {token:?} is neither in the fixed vocabulary nor in the input")]
    TargetNotCoverable { sample_id: String, token: String },
    #[error("model takes precomputed input rows; use prepare_with")]
    NeedsMatrix,
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Beam-decodes a lookup-input sample into token sequences with scores.
pub fn decode_sample(
    model: &PgnModel,
    input: &[String],
    width: usize,
) -> Result<Vec<(Vec<String>, f64)>, PgnError> {
    let probe = PgnSample { id: String::new(), input: input.to_vec(), target: Vec::new() };
    let ex = model.prepare(&probe)?;
    let ext = model.extended_vocab(input);
    let beams = beam_search(model, &ex.input, &ext, width, model.config().max_decode_len)?;
    Ok(beams.into_iter().map(|b| (ext.render(&b.tokens), b.log_prob)).collect())
}
