use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::model::{final_distribution, DecoderState, EncoderInput, PgnModel};
use super::vocab::{ExtendedVocab, END_ID, START_ID};
use super::PgnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    /// Extended-vocabulary IDs, without the start symbol.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    /// True when the last token is the end symbol.
    pub finished: bool,
}

/// Keeps the `width` best partial sequences per step. No length
/// normalization; hypotheses still alive at `max_len` are returned unfinished.
pub fn beam_search(
    model: &PgnModel,
    input: &EncoderInput,
    ext: &ExtendedVocab<'_>,
    width: usize,
    max_len: usize,
) -> Result<Vec<Beam>, PgnError> {
    if width == 0 {
        return Err(PgnError::Config("beam width must be at least 1".into()));
    }
    let enc = model.encode(input)?;
    if ext.source_ids().len() != enc.len() {
        return Err(PgnError::Shape("extended vocabulary does not match input length".into()));
    }
    let mut alive: Vec<(Beam, DecoderState)> =
        vec![(Beam { tokens: Vec::new(), log_prob: 0.0, finished: false }, model.initial_state(&enc))];
    let mut done: Vec<Beam> = Vec::new();
    for _ in 0..max_len {
        let mut candidates: Vec<(f64, usize, usize, DecoderState)> = Vec::new();
        for (b, (beam, state)) in alive.iter().enumerate() {
            let prev = beam.tokens.last().copied().unwrap_or(START_ID);
            let out = model.decode_step(state, prev, &enc);
            let dist = final_distribution(out.p_vocab.view(), out.attention.view(), out.p_gen, ext.source_ids(), ext.len());
            for (w, &pw) in dist.iter().enumerate() {
                if pw > 0.0 {
                    candidates.push((beam.log_prob + pw.ln(), b, w, out.state.clone()));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        candidates.truncate(width);
        let mut next = Vec::with_capacity(candidates.len());
        for (lp, b, w, state) in candidates {
            let mut tokens = alive[b].0.tokens.clone();
            tokens.push(w);
            let finished = w == END_ID;
            let beam = Beam { tokens, log_prob: lp, finished };
            if finished {
                done.push(beam);
            } else {
                next.push((beam, state));
            }
        }
        alive = next;
        if alive.is_empty() {
            break;
        }
    }
    done.extend(alive.into_iter().map(|(b, _)| b));
    done.sort_by(|a, b| b.log_prob.partial_cmp(&a.log_prob).unwrap_or(Ordering::Equal));
    done.truncate(width);
    Ok(done)
}

/// Picks the most probable token at every step.
pub fn greedy_decode(
    model: &PgnModel,
    input: &EncoderInput,
    ext: &ExtendedVocab<'_>,
    max_len: usize,
) -> Result<Beam, PgnError> {
    let enc = model.encode(input)?;
    let mut state = model.initial_state(&enc);
    let mut beam = Beam { tokens: Vec::new(), log_prob: 0.0, finished: false };
    let mut prev = START_ID;
    for _ in 0..max_len {
        let out = model.decode_step(&state, prev, &enc);
        let dist = final_distribution(out.p_vocab.view(), out.attention.view(), out.p_gen, ext.source_ids(), ext.len());
        let (w, pw) = dist
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best });
        beam.tokens.push(w);
        beam.log_prob += pw.ln();
        state = out.state;
        prev = w;
        if w == END_ID {
            beam.finished = true;
            break;
        }
    }
    Ok(beam)
}
