use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::PgnConfig;
use super::vocab::{ExtendedVocab, FixedVocab, InputVocab, END_ID};
use super::PgnError;
use crate::checkpoint::{params_from_tensors, tensors_from_layout, Checkpoint};
use crate::nn::{
    add_outer, concat, lstm_step, lstm_step_backward, sigmoid, softmax, softmax_backward, uniform_fill,
    Layout, LstmCache, LstmSlots, Slot,
};

const EPS: f64 = 1e-12;
const CHECKPOINT_KIND: &str = "pgn";

/// Where encoder input rows come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputSpec {
    /// Precomputed rows of width `dim` supplied per sample.
    Dense { dim: usize },
    /// A trainable table indexed by input-word IDs.
    Lookup { vocab: InputVocab, dim: usize },
}

impl InputSpec {
    pub fn dim(&self) -> usize {
        match self {
            InputSpec::Dense { dim } | InputSpec::Lookup { dim, .. } => *dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderInput {
    Dense(Array2<f64>),
    Ids(Vec<usize>),
}

impl EncoderInput {
    pub fn len(&self) -> usize {
        match self {
            EncoderInput::Dense(m) => m.nrows(),
            EncoderInput::Ids(ids) => ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Training pair as whitespace tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PgnSample {
    pub id: String,
    pub input: Vec<String>,
    pub target: Vec<String>,
}

impl PgnSample {
    pub fn from_text(id: impl Into<String>, input: &str, target: &str) -> Self {
        PgnSample {
            id: id.into(),
            input: input.split_whitespace().map(str::to_string).collect(),
            target: target.split_whitespace().map(str::to_string).collect(),
        }
    }
}

/// A sample resolved against a model's vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub input: EncoderInput,
    /// Extended-vocabulary ID of every input position.
    pub source_ids: Vec<usize>,
    pub ext_len: usize,
    /// Target IDs ending with the end symbol.
    pub target: Vec<usize>,
}

/// Per-position encoder outputs plus what the decoder needs from them.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStates {
    /// One row per input position.
    pub outputs: Array2<f64>,
    pub final_h: Array1<f64>,
    pub final_c: Array1<f64>,
    /// Attention projections of `outputs`.
    keys: Array2<f64>,
}

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.outputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
    /// Context vector from the previous step, fed back as input.
    pub context: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub p_vocab: Array1<f64>,
    pub attention: Array1<f64>,
    pub p_gen: f64,
    pub state: DecoderState,
}

/// Mixes generation and copying:
/// `P(w) = p_gen * P_vocab(w) + (1 - p_gen) * sum of attention on positions holding w`.
pub fn final_distribution(
    p_vocab: ArrayView1<'_, f64>,
    attention: ArrayView1<'_, f64>,
    p_gen: f64,
    source_ids: &[usize],
    ext_len: usize,
) -> Array1<f64> {
    let mut out = Array1::zeros(ext_len);
    out.slice_mut(s![..p_vocab.len()]).assign(&(&p_vocab * p_gen));
    for (&id, &a) in source_ids.iter().zip(attention.iter()) {
        out[id] += (1.0 - p_gen) * a;
    }
    out
}

#[derive(Debug, Clone)]
struct Slots {
    input_emb: Option<Slot>,
    enc: Vec<(LstmSlots, Option<LstmSlots>)>,
    reduce_h_w: Slot,
    reduce_h_b: Slot,
    reduce_c_w: Slot,
    reduce_c_b: Slot,
    /// Fixed vocabulary rows plus one shared row for copied tokens.
    dec_emb: Slot,
    dec: LstmSlots,
    att_wh: Slot,
    att_ws: Slot,
    att_b: Slot,
    att_v: Slot,
    out_w: Slot,
    out_b: Slot,
    gen_w: Slot,
    gen_b: Slot,
}

fn build_layout(cfg: &PgnConfig, fixed_len: usize, input: &InputSpec) -> (Layout, Slots) {
    let mut l = Layout::default();
    let (h, e, a, de) = (cfg.hidden_size, cfg.encoder_size(), cfg.attention_size, cfg.embed_size);
    let input_emb = match input {
        InputSpec::Lookup { vocab, dim } => Some(l.add("input_emb", vocab.len(), *dim)),
        InputSpec::Dense { .. } => None,
    };
    let mut enc = Vec::new();
    for layer in 0..cfg.encoder_layers {
        let in_dim = if layer == 0 { input.dim() } else { e };
        let fwd = LstmSlots::new(&mut l, &format!("enc{layer}.fwd"), in_dim, h);
        let bwd = cfg.bidirectional.then(|| LstmSlots::new(&mut l, &format!("enc{layer}.bwd"), in_dim, h));
        enc.push((fwd, bwd));
    }
    let slots = Slots {
        input_emb,
        enc,
        reduce_h_w: l.add("reduce_h.w", h, e),
        reduce_h_b: l.add("reduce_h.b", h, 1),
        reduce_c_w: l.add("reduce_c.w", h, e),
        reduce_c_b: l.add("reduce_c.b", h, 1),
        dec_emb: l.add("dec_emb", fixed_len + 1, de),
        dec: LstmSlots::new(&mut l, "dec", de + e, h),
        att_wh: l.add("att.wh", a, e),
        att_ws: l.add("att.ws", a, h),
        att_b: l.add("att.b", a, 1),
        att_v: l.add("att.v", a, 1),
        out_w: l.add("out.w", fixed_len, h + e),
        out_b: l.add("out.b", fixed_len, 1),
        gen_w: l.add("gen.w", 1, e + h + de),
        gen_b: l.add("gen.b", 1, 1),
    };
    (l, slots)
}

struct LayerRun {
    fwd: Vec<LstmCache>,
    bwd: Vec<LstmCache>,
}

struct EncoderRun {
    layers: Vec<LayerRun>,
    mask: Option<Array2<f64>>,
    states: EncoderStates,
}

struct StepCache {
    emb_row: usize,
    emb: Array1<f64>,
    lstm: LstmCache,
    u: Array2<f64>,
    attention: Array1<f64>,
    context: Array1<f64>,
    p_vocab: Array1<f64>,
    p_gen: f64,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: PgnConfig,
    fixed: FixedVocab,
    input: InputSpec,
}

/// Pointer-generator network over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct PgnModel {
    config: PgnConfig,
    fixed: FixedVocab,
    input: InputSpec,
    layout: Layout,
    slots: Slots,
    params: Vec<f64>,
}

impl PgnModel {
    pub fn new(config: PgnConfig, fixed: FixedVocab, input: InputSpec) -> Result<Self, PgnError> {
        config.validate()?;
        let (layout, slots) = build_layout(&config, fixed.len(), &input);
        let mut model = PgnModel { params: vec![0.0; layout.size], config, fixed, input, layout, slots };
        model.initialize();
        Ok(model)
    }

    fn initialize(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let p = &mut self.params;
        for (name, slot) in &self.layout.entries {
            if name == "input_emb" {
                // same distribution as a standalone trainable lookup
                slot.mat_mut(p).mapv_inplace(|_| rng.random_range(-0.1..=0.1));
            } else if slot.cols > 1 || name == "att.v" {
                uniform_fill(slot.mat_mut(p), &mut rng);
            }
        }
        for (fwd, bwd) in &self.slots.enc {
            fwd.init(p, &mut rng);
            if let Some(b) = bwd {
                b.init(p, &mut rng);
            }
        }
        self.slots.dec.init(p, &mut rng);
    }

    pub fn config(&self) -> &PgnConfig {
        &self.config
    }

    pub fn fixed_vocab(&self) -> &FixedVocab {
        &self.fixed
    }

    pub fn input_spec(&self) -> &InputSpec {
        &self.input
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Names and sizes of the parameter tensors, in layout order.
    pub fn parameter_names(&self) -> Vec<(String, usize)> {
        self.layout.entries.iter().map(|(n, s)| (n.clone(), s.len())).collect()
    }

    /// Resolves a sample for a lookup-input model.
    pub fn prepare(&self, sample: &PgnSample) -> Result<Example, PgnError> {
        let ids = match &self.input {
            InputSpec::Lookup { vocab, .. } => sample.input.iter().map(|t| vocab.id(t)).collect(),
            InputSpec::Dense { .. } => return Err(PgnError::NeedsMatrix),
        };
        self.prepare_with(sample, EncoderInput::Ids(ids))
    }

    /// Resolves a sample whose input rows are supplied by the caller.
    pub fn prepare_with(&self, sample: &PgnSample, input: EncoderInput) -> Result<Example, PgnError> {
        if input.len() != sample.input.len() {
            return Err(PgnError::Shape(format!(
                "{} input rows for {} tokens",
                input.len(),
                sample.input.len()
            )));
        }
        let ext = ExtendedVocab::new(&self.fixed, &sample.input);
        let mut target = Vec::with_capacity(sample.target.len() + 1);
        for tok in &sample.target {
            let id = ext.id(tok).ok_or_else(|| PgnError::TargetNotCoverable {
                sample_id: sample.id.clone(),
                token: tok.clone(),
            })?;
            target.push(id);
        }
        target.push(END_ID);
        Ok(Example {
            id: sample.id.clone(),
            input,
            source_ids: ext.source_ids().to_vec(),
            ext_len: ext.len(),
            target,
        })
    }

    /// Input rows for a sample, before dropout.
    fn input_rows(&self, input: &EncoderInput) -> Result<Array2<f64>, PgnError> {
        if input.is_empty() {
            return Err(PgnError::Shape("empty input".into()));
        }
        let dim = self.input.dim();
        match (input, &self.slots.input_emb) {
            (EncoderInput::Dense(m), None) => {
                if m.ncols() != dim {
                    return Err(PgnError::Shape(format!("input rows have width {}, expected {dim}", m.ncols())));
                }
                Ok(m.clone())
            }
            (EncoderInput::Ids(ids), Some(slot)) => {
                let mut m = Array2::zeros((ids.len(), dim));
                for (t, &id) in ids.iter().enumerate() {
                    if id >= slot.rows {
                        return Err(PgnError::Shape(format!("input id {id} outside vocabulary")));
                    }
                    m.row_mut(t).assign(&slot.row(&self.params, id));
                }
                Ok(m)
            }
            (EncoderInput::Dense(_), Some(_)) => Err(PgnError::Shape("model expects input ids".into())),
            (EncoderInput::Ids(_), None) => Err(PgnError::NeedsMatrix),
        }
    }

    fn run_encoder(&self, input: &EncoderInput, rng: Option<&mut ChaCha8Rng>) -> Result<EncoderRun, PgnError> {
        let p = &self.params;
        let mut x = self.input_rows(input)?;
        let n = x.nrows();
        let hs = self.config.hidden_size;
        let mut mask = None;
        if let Some(rng) = rng {
            let d = self.config.dropout;
            if d > 0.0 {
                let m = Array2::from_shape_simple_fn(x.dim(), || {
                    if rng.random::<f64>() < d {
                        0.0
                    } else {
                        1.0 / (1.0 - d)
                    }
                });
                x = &x * &m;
                mask = Some(m);
            }
        }
        let mut layers = Vec::with_capacity(self.slots.enc.len());
        for (fwd, bwd) in &self.slots.enc {
            let run_dir = |cell: &LstmSlots, order: &mut dyn Iterator<Item = usize>| {
                let mut h = Array1::zeros(hs);
                let mut c = Array1::zeros(hs);
                let mut caches: Vec<Option<LstmCache>> = (0..n).map(|_| None).collect();
                for t in order {
                    let cache = lstm_step(p, cell, x.row(t), h.view(), c.view());
                    h = cache.h.clone();
                    c = cache.c.clone();
                    caches[t] = Some(cache);
                }
                caches.into_iter().map(|c| c.expect("every position visited")).collect::<Vec<_>>()
            };
            let f = run_dir(fwd, &mut (0..n));
            let b = match bwd {
                Some(cell) => run_dir(cell, &mut (0..n).rev()),
                None => Vec::new(),
            };
            let width = if b.is_empty() { hs } else { 2 * hs };
            let mut out = Array2::zeros((n, width));
            for t in 0..n {
                out.slice_mut(s![t, ..hs]).assign(&f[t].h);
                if !b.is_empty() {
                    out.slice_mut(s![t, hs..]).assign(&b[t].h);
                }
            }
            layers.push(LayerRun { fwd: f, bwd: b });
            x = out;
        }
        let top = layers.last().expect("at least one layer");
        let (final_h, final_c) = if top.bwd.is_empty() {
            (top.fwd[n - 1].h.clone(), top.fwd[n - 1].c.clone())
        } else {
            (
                concat(&[top.fwd[n - 1].h.view(), top.bwd[0].h.view()]),
                concat(&[top.fwd[n - 1].c.view(), top.bwd[0].c.view()]),
            )
        };
        let keys = x.dot(&self.slots.att_wh.mat(p).t());
        Ok(EncoderRun { layers, mask, states: EncoderStates { outputs: x, final_h, final_c, keys } })
    }

    /// One state per input position; deterministic given weights and input.
    pub fn encode(&self, input: &EncoderInput) -> Result<EncoderStates, PgnError> {
        Ok(self.run_encoder(input, None)?.states)
    }

    pub fn initial_state(&self, enc: &EncoderStates) -> DecoderState {
        let p = &self.params;
        let sl = &self.slots;
        let h = (sl.reduce_h_w.mat(p).dot(&enc.final_h) + sl.reduce_h_b.vec(p)).mapv(f64::tanh);
        let c = (sl.reduce_c_w.mat(p).dot(&enc.final_c) + sl.reduce_c_b.vec(p)).mapv(f64::tanh);
        DecoderState { h, c, context: Array1::zeros(self.config.encoder_size()) }
    }

    fn step_inner(&self, st: &DecoderState, prev: usize, enc: &EncoderStates) -> (StepOutput, StepCache) {
        let p = &self.params;
        let sl = &self.slots;
        let emb_row = prev.min(self.fixed.len());
        let emb = sl.dec_emb.row(p, emb_row).to_owned();
        let x = concat(&[emb.view(), st.context.view()]);
        let lstm = lstm_step(p, &sl.dec, x.view(), st.h.view(), st.c.view());
        let q = sl.att_ws.mat(p).dot(&lstm.h) + sl.att_b.vec(p);
        let u = (&enc.keys + &q).mapv(f64::tanh);
        let attention = softmax(u.dot(&sl.att_v.vec(p)).view());
        let context = enc.outputs.t().dot(&attention);
        let so = concat(&[lstm.h.view(), context.view()]);
        let p_vocab = softmax((sl.out_w.mat(p).dot(&so) + sl.out_b.vec(p)).view());
        let gin = concat(&[context.view(), lstm.h.view(), emb.view()]);
        let p_gen = sigmoid(sl.gen_w.vec(p).dot(&gin) + p[sl.gen_b.offset]);
        let state = DecoderState { h: lstm.h.clone(), c: lstm.c.clone(), context: context.clone() };
        let out = StepOutput { p_vocab: p_vocab.clone(), attention: attention.clone(), p_gen, state };
        (out, StepCache { emb_row, emb, lstm, u, attention, context, p_vocab, p_gen })
    }

    /// One decoder step from `state` after emitting extended-vocabulary ID `prev`.
    pub fn decode_step(&self, state: &DecoderState, prev: usize, enc: &EncoderStates) -> StepOutput {
        self.step_inner(state, prev, enc).0
    }

    /// Mean per-token negative log-likelihood under teacher forcing.
    pub fn loss(&self, ex: &Example) -> Result<f64, PgnError> {
        let enc = self.encode(&ex.input)?;
        let mut st = self.initial_state(&enc);
        let mut prev = super::vocab::START_ID;
        let mut total = 0.0;
        for &w in &ex.target {
            let out = self.decode_step(&st, prev, &enc);
            let dist =
                final_distribution(out.p_vocab.view(), out.attention.view(), out.p_gen, &ex.source_ids, ex.ext_len);
            total -= (dist[w] + EPS).ln();
            st = out.state;
            prev = w;
        }
        Ok(total / ex.target.len() as f64)
    }

    /// Loss and its gradient with respect to every parameter. Dropout is
    /// applied only when `rng` is given.
    pub fn loss_and_gradient(
        &self,
        ex: &Example,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<f64>), PgnError> {
        let p = &self.params;
        let sl = &self.slots;
        let run = self.run_encoder(&ex.input, rng)?;
        let enc = &run.states;
        let init = self.initial_state(enc);
        let mut steps = Vec::with_capacity(ex.target.len());
        let mut st = init.clone();
        let mut prev = super::vocab::START_ID;
        let mut loss = 0.0;
        let mut probs = Vec::with_capacity(ex.target.len());
        for &w in &ex.target {
            let (out, cache) = self.step_inner(&st, prev, enc);
            let dist =
                final_distribution(out.p_vocab.view(), out.attention.view(), out.p_gen, &ex.source_ids, ex.ext_len);
            loss -= (dist[w] + EPS).ln();
            probs.push(dist[w]);
            steps.push(cache);
            st = out.state;
            prev = w;
        }
        let t_len = ex.target.len() as f64;
        loss /= t_len;

        let (hs, es, de) = (self.config.hidden_size, self.config.encoder_size(), self.config.embed_size);
        let vf = self.fixed.len();
        let n = enc.len();
        let mut grad = vec![0.0; self.layout.size];
        let mut d_out = Array2::<f64>::zeros((n, es));
        let mut d_keys = Array2::<f64>::zeros((n, self.config.attention_size));
        let mut dh = Array1::<f64>::zeros(hs);
        let mut dc = Array1::<f64>::zeros(hs);
        let mut dctx_next = Array1::<f64>::zeros(es);
        let att_v = sl.att_v.vec(p);
        for t in (0..steps.len()).rev() {
            let sc = &steps[t];
            let w = ex.target[t];
            let s_t = &sc.lstm.h;
            let g = -1.0 / (t_len * (probs[t] + EPS));
            let aw: f64 = ex
                .source_ids
                .iter()
                .zip(sc.attention.iter())
                .filter(|(&id, _)| id == w)
                .map(|(_, a)| a)
                .sum();
            let pvw = if w < vf { sc.p_vocab[w] } else { 0.0 };
            let pg = sc.p_gen;

            let mut ds = dh.clone();
            let mut dctx = dctx_next.clone();
            if w < vf {
                let mut dlogits = &sc.p_vocab * (-g * pg * pvw);
                dlogits[w] += g * pg * pvw;
                let so = concat(&[s_t.view(), sc.context.view()]);
                add_outer(sl.out_w.mat_mut(&mut grad), &dlogits, so.view());
                sl.out_b.vec_mut(&mut grad).scaled_add(1.0, &dlogits);
                let dso = sl.out_w.mat(p).t().dot(&dlogits);
                ds += &dso.slice(s![..hs]);
                dctx += &dso.slice(s![hs..]);
            }
            let dz = g * (pvw - aw) * pg * (1.0 - pg);
            let gin = concat(&[sc.context.view(), s_t.view(), sc.emb.view()]);
            sl.gen_w.vec_mut(&mut grad).scaled_add(dz, &gin);
            grad[sl.gen_b.offset] += dz;
            let gw = sl.gen_w.vec(p);
            dctx.scaled_add(dz, &gw.slice(s![..es]));
            ds.scaled_add(dz, &gw.slice(s![es..es + hs]));
            let mut demb = gw.slice(s![es + hs..]).to_owned() * dz;

            let mut da = enc.outputs.dot(&dctx);
            for (i, &id) in ex.source_ids.iter().enumerate() {
                if id == w {
                    da[i] += g * (1.0 - pg);
                }
            }
            for (mut row, &a) in d_out.axis_iter_mut(Axis(0)).zip(sc.attention.iter()) {
                row.scaled_add(a, &dctx);
            }
            let d_score = softmax_backward(&sc.attention, &da);
            sl.att_v.vec_mut(&mut grad).scaled_add(1.0, &sc.u.t().dot(&d_score));
            let mut dpre = Array2::<f64>::zeros(sc.u.dim());
            for (i, mut row) in dpre.axis_iter_mut(Axis(0)).enumerate() {
                let u = sc.u.row(i);
                row.zip_mut_with(&u, |r, &uv| *r = 1.0 - uv * uv);
                row.zip_mut_with(&att_v, |r, &v| *r *= d_score[i] * v);
            }
            d_keys += &dpre;
            let dq = dpre.sum_axis(Axis(0));
            add_outer(sl.att_ws.mat_mut(&mut grad), &dq, s_t.view());
            sl.att_b.vec_mut(&mut grad).scaled_add(1.0, &dq);
            ds += &sl.att_ws.mat(p).t().dot(&dq);

            let (dx, dh_prev, dc_prev) = lstm_step_backward(p, &mut grad, &sl.dec, &sc.lstm, &ds, &dc);
            demb += &dx.slice(s![..de]);
            dctx_next = dx.slice(s![de..]).to_owned();
            sl.dec_emb.row_mut(&mut grad, sc.emb_row).scaled_add(1.0, &demb);
            dh = dh_prev;
            dc = dc_prev;
        }

        // keys = outputs . Wh^T
        let dwh = d_keys.t().dot(&enc.outputs);
        sl.att_wh.mat_mut(&mut grad).scaled_add(1.0, &dwh);
        d_out += &d_keys.dot(&sl.att_wh.mat(p));

        let reduce = |grad: &mut [f64], w: &Slot, b: &Slot, out: &Array1<f64>, input: &Array1<f64>, dout: &Array1<f64>| {
            let dpre = dout * &out.mapv(|v| 1.0 - v * v);
            add_outer(w.mat_mut(grad), &dpre, input.view());
            b.vec_mut(grad).scaled_add(1.0, &dpre);
            w.mat(p).t().dot(&dpre)
        };
        let dfinal_h = reduce(&mut grad, &sl.reduce_h_w, &sl.reduce_h_b, &init.h, &enc.final_h, &dh);
        let dfinal_c = reduce(&mut grad, &sl.reduce_c_w, &sl.reduce_c_b, &init.c, &enc.final_c, &dc);

        let top = run.layers.len() - 1;
        for (l, layer) in run.layers.iter().enumerate().rev() {
            let (fwd, bwd) = &sl.enc[l];
            let mut d_in = Array2::<f64>::zeros((n, fwd.input));
            let mut dhc = Array1::<f64>::zeros(hs);
            let mut dcc = Array1::<f64>::zeros(hs);
            for t in (0..n).rev() {
                let mut dh_t = &d_out.slice(s![t, ..hs]) + &dhc;
                let mut dc_t = dcc.clone();
                if l == top && t == n - 1 {
                    dh_t += &dfinal_h.slice(s![..hs]);
                    dc_t += &dfinal_c.slice(s![..hs]);
                }
                let (dx, dhp, dcp) = lstm_step_backward(p, &mut grad, fwd, &layer.fwd[t], &dh_t, &dc_t);
                d_in.row_mut(t).scaled_add(1.0, &dx);
                dhc = dhp;
                dcc = dcp;
            }
            if let Some(bwd) = bwd {
                dhc.fill(0.0);
                dcc.fill(0.0);
                for t in 0..n {
                    let mut dh_t = &d_out.slice(s![t, hs..]) + &dhc;
                    let mut dc_t = dcc.clone();
                    if l == top && t == 0 {
                        dh_t += &dfinal_h.slice(s![hs..]);
                        dc_t += &dfinal_c.slice(s![hs..]);
                    }
                    let (dx, dhp, dcp) = lstm_step_backward(p, &mut grad, bwd, &layer.bwd[t], &dh_t, &dc_t);
                    d_in.row_mut(t).scaled_add(1.0, &dx);
                    dhc = dhp;
                    dcc = dcp;
                }
            }
            d_out = d_in;
        }
        if let (Some(slot), EncoderInput::Ids(ids)) = (&sl.input_emb, &ex.input) {
            if let Some(m) = &run.mask {
                d_out *= m;
            }
            for (t, &id) in ids.iter().enumerate() {
                slot.row_mut(&mut grad, id).scaled_add(1.0, &d_out.row(t));
            }
        }
        Ok((loss, grad))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PgnError> {
        let meta = Meta { config: self.config.clone(), fixed: self.fixed.clone(), input: self.input.clone() };
        let ck = Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            config: serde_json::to_value(meta).map_err(crate::checkpoint::CheckpointError::from)?,
            tensors: tensors_from_layout(&self.layout, &self.params),
        };
        ck.save(path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PgnError> {
        let ck = Checkpoint::load(path)?;
        ck.expect_kind(CHECKPOINT_KIND)?;
        let meta: Meta =
            serde_json::from_value(ck.config.clone()).map_err(crate::checkpoint::CheckpointError::from)?;
        meta.config.validate()?;
        let (layout, slots) = build_layout(&meta.config, meta.fixed.len(), &meta.input);
        let params = params_from_tensors(&layout, &ck)?;
        Ok(PgnModel { config: meta.config, fixed: meta.fixed, input: meta.input, layout, slots, params })
    }

    pub fn extended_vocab<'a, S: AsRef<str>>(&'a self, input: &[S]) -> ExtendedVocab<'a> {
        ExtendedVocab::new(&self.fixed, input)
    }
}
