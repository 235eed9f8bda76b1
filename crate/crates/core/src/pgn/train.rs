use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Example, PgnModel};
use super::PgnError;
use crate::nn::{clip_global_norm, Adam};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub wall_time: f64,
}

/// Teacher-forced mini-batch training with Adam. Writes one JSON line per
/// epoch to `log` when given.
pub fn train(
    model: &mut PgnModel,
    examples: &[Example],
    mut log: Option<&mut dyn Write>,
) -> Result<Vec<EpochLog>, PgnError> {
    let cfg = model.config().clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 || examples.is_empty() {
        return Ok(history);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut opt = Adam::new(model.parameter_count(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let start = Instant::now();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; model.parameter_count()];
            for &i in batch {
                let (loss, g) = model.loss_and_gradient(&examples[i], Some(&mut rng))?;
                total += loss;
                for (acc, x) in grad.iter_mut().zip(&g) {
                    *acc += x;
                }
            }
            let k = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= k);
            clip_global_norm(&mut grad, cfg.grad_clip_norm);
            opt.step(model.parameters_mut(), &grad);
        }
        let entry = EpochLog { epoch, loss: total / examples.len() as f64, wall_time: start.elapsed().as_secs_f64() };
        log::info!("epoch {} loss {:.4}", entry.epoch, entry.loss);
        if let Some(w) = log.as_deref_mut() {
            serde_json::to_writer(&mut *w, &entry).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        history.push(entry);
    }
    Ok(history)
}
