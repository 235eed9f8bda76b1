use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{response_snippet, CandidateScorer, RerankError, RerankSample};
use crate::checkpoint::{params_from_tensors, tensors_from_layout, Checkpoint};
use crate::codec::SEP;
use crate::kg_client::AnswerSet;
use crate::nn::{clip_global_norm, lstm_step, lstm_step_backward, sigmoid, uniform_fill, Adam, Layout, LstmCache, LstmSlots, Slot};
use crate::pgn::copy_form;

const CHECKPOINT_KIND: &str = "reranker";
const UNK: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankConfig {
    pub embed_size: usize,
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub grad_clip_norm: f64,
    pub max_tokens: usize,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            embed_size: 32,
            hidden_size: 32,
            epochs: 8,
            batch_size: 8,
            learning_rate: 3e-3,
            grad_clip_norm: 5.0,
            max_tokens: 256,
            min_count: 1,
            seed: 17,
        }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<(), RerankError> {
        let positive = [
            ("embed_size", self.embed_size),
            ("hidden_size", self.hidden_size),
            ("batch_size", self.batch_size),
            ("max_tokens", self.max_tokens),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(RerankError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(RerankError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Words of `question [SEP] query [SEP] response`, lowercased with sentence
/// punctuation trimmed.
pub fn scorer_tokens(question: &str, query: &str, snippet: &str) -> Vec<String> {
    let words = |s: &str| -> Vec<String> { s.split_whitespace().map(|w| copy_form(w).to_lowercase()).collect() };
    let mut out = words(question);
    out.push(SEP.to_string());
    out.extend(words(query));
    out.push(SEP.to_string());
    out.extend(words(snippet));
    out
}

#[derive(Debug, Clone, Copy)]
struct Slots {
    embed: Slot,
    lstm: LstmSlots,
    head: Slot,
    bias: Slot,
}

fn build_layout(cfg: &RerankConfig, vocab: usize) -> (Layout, Slots) {
    let mut layout = Layout::default();
    let embed = layout.add("embed", vocab, cfg.embed_size);
    let lstm = LstmSlots::new(&mut layout, "lstm", cfg.embed_size, cfg.hidden_size);
    let head = layout.add("head.w", 1, cfg.hidden_size);
    let bias = layout.add("head.b", 1, 1);
    (layout, Slots { embed, lstm, head, bias })
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: RerankConfig,
    vocab: Vec<String>,
}

/// Recurrent binary scorer: embeddings, one LSTM layer, mean pooling and a
/// linear head producing a logit.
#[derive(Debug, Clone)]
pub struct RerankModel {
    config: RerankConfig,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    layout: Layout,
    slots: Slots,
    params: Vec<f64>,
}

struct Forward {
    steps: Vec<LstmCache>,
    pooled: Array1<f64>,
    logit: f64,
}

impl RerankModel {
    fn with_vocab(config: RerankConfig, vocab: Vec<String>) -> Self {
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let (layout, slots) = build_layout(&config, vocab.len());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; layout.size];
        uniform_fill(slots.embed.mat_mut(&mut params), &mut rng);
        slots.lstm.init(&mut params, &mut rng);
        uniform_fill(slots.head.mat_mut(&mut params), &mut rng);
        RerankModel { config, vocab, index, layout, slots, params }
    }

    pub fn config(&self) -> &RerankConfig {
        &self.config
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    fn ids(&self, sample_tokens: &[String]) -> Vec<usize> {
        let mut ids: Vec<usize> = sample_tokens.iter().map(|t| self.index.get(t).copied().unwrap_or(0)).collect();
        ids.truncate(self.config.max_tokens);
        ids
    }

    fn forward(&self, ids: &[usize]) -> Forward {
        let p = &self.params;
        let hs = self.config.hidden_size;
        let mut h = Array1::zeros(hs);
        let mut c = Array1::zeros(hs);
        let mut steps = Vec::with_capacity(ids.len());
        let mut pooled = Array1::zeros(hs);
        for &id in ids {
            let cache = lstm_step(p, &self.slots.lstm, self.slots.embed.row(p, id), h.view(), c.view());
            h = cache.h.clone();
            c = cache.c.clone();
            pooled += &cache.h;
            steps.push(cache);
        }
        if !ids.is_empty() {
            pooled /= ids.len() as f64;
        }
        let logit = self.slots.head.row(p, 0).dot(&pooled) + self.slots.bias.vec(p)[0];
        Forward { steps, pooled, logit }
    }

    /// Logit for one concatenated candidate text.
    pub fn score_text(&self, question: &str, query: &str, snippet: &str) -> f64 {
        self.forward(&self.ids(&scorer_tokens(question, query, snippet))).logit
    }

    /// Binary cross-entropy of one sample, accumulating its gradient.
    fn backward(&self, ids: &[usize], label: f64, grad: &mut [f64]) -> f64 {
        let fw = self.forward(ids);
        let p = &self.params;
        let prob = sigmoid(fw.logit);
        let loss = -(label * (prob + 1e-12).ln() + (1.0 - label) * (1.0 - prob + 1e-12).ln());
        let dlogit = prob - label;
        self.slots.head.row_mut(grad, 0).scaled_add(dlogit, &fw.pooled);
        self.slots.bias.vec_mut(grad)[0] += dlogit;
        if ids.is_empty() {
            return loss;
        }
        let dpool: Array1<f64> = self.slots.head.row(p, 0).mapv(|w| w * dlogit / ids.len() as f64);
        let hs = self.config.hidden_size;
        let mut dh_next: Array1<f64> = Array1::zeros(hs);
        let mut dc_next: Array1<f64> = Array1::zeros(hs);
        for (t, cache) in fw.steps.iter().enumerate().rev() {
            let dh = &dh_next + &dpool;
            let (dx, dh_prev, dc_prev) = lstm_step_backward(p, grad, &self.slots.lstm, cache, &dh, &dc_next);
            self.slots.embed.row_mut(grad, ids[t]).scaled_add(1.0, &dx);
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        loss
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RerankError> {
        let meta = Meta { config: self.config.clone(), vocab: self.vocab.clone() };
        let ck = Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            config: serde_json::to_value(meta).map_err(crate::checkpoint::CheckpointError::from)?,
            tensors: tensors_from_layout(&self.layout, &self.params),
        };
        ck.save(path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RerankError> {
        let ck = Checkpoint::load(path)?;
        ck.expect_kind(CHECKPOINT_KIND)?;
        let meta: Meta = serde_json::from_value(ck.config.clone()).map_err(crate::checkpoint::CheckpointError::from)?;
        meta.config.validate()?;
        let mut model = Self::with_vocab(meta.config, meta.vocab);
        model.params = params_from_tensors(&model.layout, &ck)?;
        Ok(model)
    }
}

impl CandidateScorer for RerankModel {
    fn score(&self, question: &str, query: &str, answers: &AnswerSet) -> f64 {
        self.score_text(question, query, &response_snippet(answers))
    }
}

/// Training loss of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankEpoch {
    pub epoch: usize,
    pub loss: f64,
}

/// Trains a scorer on labeled candidates. Both labels must be present.
pub fn train_reranker(samples: &[RerankSample], config: RerankConfig) -> Result<(RerankModel, Vec<RerankEpoch>), RerankError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(RerankError::Empty);
    }
    let labels: BTreeSet<u8> = samples.iter().map(|s| s.label).collect();
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(RerankError::Config(format!("label {bad} is not 0 or 1")));
    }
    if labels.len() < 2 {
        return Err(RerankError::DegenerateData);
    }
    let texts: Vec<Vec<String>> =
        samples.iter().map(|s| scorer_tokens(&s.question, &s.query, &s.response_snippet)).collect();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in texts.iter().flatten() {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let kept: BTreeSet<&str> =
        counts.into_iter().filter(|(t, c)| *c >= config.min_count.max(1) && *t != UNK).map(|(t, _)| t).collect();
    let vocab: Vec<String> = std::iter::once(UNK).chain(kept).map(str::to_string).collect();

    let mut model = RerankModel::with_vocab(config.clone(), vocab);
    let encoded: Vec<(Vec<usize>, f64)> =
        texts.iter().zip(samples).map(|(t, s)| (model.ids(t), f64::from(s.label))).collect();
    let mut adam = Adam::new(model.params.len(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut grad = vec![0.0; model.params.len()];
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                let (ids, label) = &encoded[i];
                total += model.backward(ids, *label, &mut grad);
            }
            let k = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= k);
            clip_global_norm(&mut grad, config.grad_clip_norm);
            adam.step(&mut model.params, &grad);
        }
        let loss = total / encoded.len() as f64;
        log::info!("reranker epoch {} loss {:.5}", epoch + 1, loss);
        log.push(RerankEpoch { epoch: epoch + 1, loss });
    }
    Ok((model, log))
}

/// Mean binary cross-entropy of a model over samples.
pub fn mean_loss(model: &RerankModel, samples: &[RerankSample]) -> f64 {
    let total: f64 = samples
        .iter()
        .map(|s| {
            let p = sigmoid(model.score_text(&s.question, &s.query, &s.response_snippet));
            let y = f64::from(s.label);
            -(y * (p + 1e-12).ln() + (1.0 - y) * (1.0 - p + 1e-12).ln())
        })
        .sum();
    total / samples.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(q: &str, query: &str, resp: &str, label: u8) -> RerankSample {
        RerankSample { question: q.into(), query: query.into(), response_snippet: resp.into(), label }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = RerankConfig { embed_size: 4, hidden_size: 5, ..Default::default() };
        let data = [sample("is it red", "ask marker", "true", 1), sample("is it red", "ask other", "false", 0)];
        let (mut model, _) = train_reranker(&data, RerankConfig { epochs: 0, ..cfg }).unwrap();
        let ids = model.ids(&scorer_tokens("is it red", "ask marker", "true"));
        let mut grad = vec![0.0; model.params.len()];
        model.backward(&ids, 1.0, &mut grad);
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for k in (0..model.params.len()).step_by(7) {
            let orig = model.params[k];
            model.params[k] = orig + eps;
            let up = model.backward(&ids, 1.0, &mut vec![0.0; grad.len()]);
            model.params[k] = orig - eps;
            let down = model.backward(&ids, 1.0, &mut vec![0.0; grad.len()]);
            model.params[k] = orig;
            let fd = (up - down) / (2.0 * eps);
            worst = worst.max((fd - grad[k]).abs() / (fd.abs() + grad[k].abs()).max(1e-6));
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn single_label_is_degenerate() {
        let data = [sample("a", "b", "c", 1), sample("d", "e", "f", 1)];
        assert!(matches!(train_reranker(&data, RerankConfig::default()), Err(RerankError::DegenerateData)));
        assert!(matches!(train_reranker(&[], RerankConfig::default()), Err(RerankError::Empty)));
    }

    fn separable(n: usize) -> Vec<RerankSample> {
        (0..n)
            .map(|i| {
                let good = i % 3 == 0;
                let rel = if good { "wdt:P26" } else { ["wdt:P40", "wdt:P22", "wdt:P25"][i % 3] };
                sample(
                    &format!("who is the spouse of person{}", i % 7),
                    &format!("SELECT ?var0 WHERE {{ wd:Q{} {rel} ?var0 }}", i % 7),
                    &format!("var0=Q{}", i % 11),
                    u8::from(good),
                )
            })
            .collect()
    }

    #[test]
    fn learns_separable_set() {
        let data = separable(60);
        let (model, log) = train_reranker(&data, RerankConfig { epochs: 12, ..Default::default() }).unwrap();
        for w in log.windows(2) {
            assert!(w[1].loss < w[0].loss, "loss rose: {log:?}");
        }
        let correct = data
            .iter()
            .filter(|s| (model.score_text(&s.question, &s.query, &s.response_snippet) > 0.0) == (s.label == 1))
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.99, "{correct}/{}", data.len());
    }

    #[test]
    fn deterministic_and_round_trips() {
        let data = separable(20);
        let cfg = RerankConfig { epochs: 2, ..Default::default() };
        let (a, _) = train_reranker(&data, cfg.clone()).unwrap();
        let (b, _) = train_reranker(&data, cfg).unwrap();
        let s = |m: &RerankModel| m.score_text("who is it", "SELECT ?var0", "var0=x");
        assert_eq!(s(&a), s(&b));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rr.ckpt");
        a.save(&path).unwrap();
        let loaded = RerankModel::load(&path).unwrap();
        assert!((s(&loaded) - s(&a)).abs() < 1e-4);
    }
}
