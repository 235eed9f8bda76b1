use serde::{Deserialize, Serialize};

use super::PgnError;

/// Architecture and training settings. Defaults target full-size runs;
/// desk-scale experiments shrink the dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgnConfig {
    pub hidden_size: usize,
    pub encoder_layers: usize,
    pub bidirectional: bool,
    /// Applied to encoder inputs during training.
    pub dropout: f64,
    pub max_decode_len: usize,
    pub beam_width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global L2 norm; 0 disables clipping.
    pub grad_clip_norm: f64,
    pub seed: u64,
    /// Decoder token embedding width.
    pub embed_size: usize,
    pub attention_size: usize,
    /// Width of the trainable input lookup when no precomputed embeddings are used.
    pub input_dim: usize,
    /// Input words seen fewer times map to the unknown slot of the lookup.
    pub min_count: usize,
}

impl Default for PgnConfig {
    fn default() -> Self {
        PgnConfig {
            hidden_size: 512,
            encoder_layers: 1,
            bidirectional: true,
            dropout: 0.0,
            max_decode_len: 96,
            beam_width: 10,
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 16,
            grad_clip_norm: 5.0,
            seed: 13,
            embed_size: 128,
            attention_size: 512,
            input_dim: 968,
            min_count: 1,
        }
    }
}

impl PgnConfig {
    pub fn validate(&self) -> Result<(), PgnError> {
        let bad = |m: &str| Err(PgnError::Config(m.to_string()));
        if self.beam_width < 1 {
            return bad("beam_width must be at least 1");
        }
        if self.max_decode_len < 1 {
            return bad("max_decode_len must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.hidden_size == 0 || self.encoder_layers == 0 || self.embed_size == 0 || self.attention_size == 0 {
            return bad("layer sizes must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }

    /// Width of one encoder state.
    pub fn encoder_size(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden_size
        } else {
            self.hidden_size
        }
    }
}
