//! Small dense building blocks over a flat parameter vector: named slots,
//! an LSTM cell with its backward pass, softmax and Adam.

use ndarray::{s, Array1, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;

/// A matrix-shaped window into the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Slot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn mat<'a>(&self, p: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.rows, self.cols), &p[self.range()]).expect("slot shape")
    }

    pub fn mat_mut<'a>(&self, p: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape((self.rows, self.cols), &mut p[self.range()]).expect("slot shape")
    }

    pub fn vec<'a>(&self, p: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(&p[self.range()])
    }

    pub fn vec_mut<'a>(&self, p: &'a mut [f64]) -> ArrayViewMut1<'a, f64> {
        ArrayViewMut1::from(&mut p[self.range()])
    }

    pub fn row<'a>(&self, p: &'a [f64], r: usize) -> ArrayView1<'a, f64> {
        let start = self.offset + r * self.cols;
        ArrayView1::from(&p[start..start + self.cols])
    }

    pub fn row_mut<'a>(&self, p: &'a mut [f64], r: usize) -> ArrayViewMut1<'a, f64> {
        let start = self.offset + r * self.cols;
        ArrayViewMut1::from(&mut p[start..start + self.cols])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Layout {
    pub entries: Vec<(String, Slot)>,
    pub size: usize,
}

impl Layout {
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Slot {
        let slot = Slot { offset: self.size, rows, cols };
        self.size += slot.len();
        self.entries.push((name.into(), slot));
        slot
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LstmSlots {
    /// 4H x (input + H), gate order input, forget, cell, output.
    pub w: Slot,
    pub b: Slot,
    pub input: usize,
    pub hidden: usize,
}

impl LstmSlots {
    pub fn new(layout: &mut Layout, name: &str, input: usize, hidden: usize) -> Self {
        LstmSlots {
            w: layout.add(format!("{name}.w"), 4 * hidden, input + hidden),
            b: layout.add(format!("{name}.b"), 4 * hidden, 1),
            input,
            hidden,
        }
    }

    pub fn init(&self, p: &mut [f64], rng: &mut impl Rng) {
        uniform_fill(self.w.mat_mut(p), rng);
        let mut b = self.b.vec_mut(p);
        b.fill(0.0);
        b.slice_mut(s![self.hidden..2 * self.hidden]).fill(1.0);
    }
}

/// Glorot-uniform initialization.
pub(crate) fn uniform_fill(mut m: ArrayViewMut2<'_, f64>, rng: &mut impl Rng) {
    let (r, c) = m.dim();
    let a = (6.0 / (r + c) as f64).sqrt();
    m.mapv_inplace(|_| rng.random_range(-a..a));
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(x: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut e = x.mapv(|v| (v - max).exp());
    let z = e.sum();
    e /= z;
    e
}

/// Gradient through softmax given output `y` and upstream `dy`.
pub(crate) fn softmax_backward(y: &Array1<f64>, dy: &Array1<f64>) -> Array1<f64> {
    let dot = y.dot(dy);
    y * &(dy - dot)
}

/// Concatenates views into one vector.
pub(crate) fn concat(parts: &[ArrayView1<'_, f64>]) -> Array1<f64> {
    let n: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = Array1::zeros(n);
    let mut at = 0;
    for p in parts {
        out.slice_mut(s![at..at + p.len()]).assign(p);
        at += p.len();
    }
    out
}

/// Accumulates `g += a b^T`.
pub(crate) fn add_outer(mut g: ArrayViewMut2<'_, f64>, a: &Array1<f64>, b: ArrayView1<'_, f64>) {
    for (mut row, &ai) in g.axis_iter_mut(Axis(0)).zip(a.iter()) {
        if ai != 0.0 {
            row.scaled_add(ai, &b);
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    /// `[x; h_prev]`
    pub xh: Array1<f64>,
    pub c_prev: Array1<f64>,
    /// Activated gates, 4H.
    pub gates: Array1<f64>,
    pub c: Array1<f64>,
    pub tanh_c: Array1<f64>,
    pub h: Array1<f64>,
}

pub(crate) fn lstm_step(
    p: &[f64],
    l: &LstmSlots,
    x: ArrayView1<'_, f64>,
    h_prev: ArrayView1<'_, f64>,
    c_prev: ArrayView1<'_, f64>,
) -> LstmCache {
    let hs = l.hidden;
    let xh = concat(&[x, h_prev]);
    let mut gates = l.w.mat(p).dot(&xh) + l.b.vec(p);
    for (k, g) in gates.iter_mut().enumerate() {
        *g = if (2 * hs..3 * hs).contains(&k) { g.tanh() } else { sigmoid(*g) };
    }
    let i = gates.slice(s![..hs]);
    let f = gates.slice(s![hs..2 * hs]);
    let g = gates.slice(s![2 * hs..3 * hs]);
    let o = gates.slice(s![3 * hs..]);
    let c = &f * &c_prev + &i * &g;
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;
    LstmCache { xh, c_prev: c_prev.to_owned(), gates, c, tanh_c, h }
}

/// Returns `(dx, dh_prev, dc_prev)` and accumulates weight gradients into `grad`.
pub(crate) fn lstm_step_backward(
    p: &[f64],
    grad: &mut [f64],
    l: &LstmSlots,
    cache: &LstmCache,
    dh: &Array1<f64>,
    dc_next: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let hs = l.hidden;
    let gt = &cache.gates;
    let i = gt.slice(s![..hs]);
    let f = gt.slice(s![hs..2 * hs]);
    let g = gt.slice(s![2 * hs..3 * hs]);
    let o = gt.slice(s![3 * hs..]);
    let dc = dc_next + &(dh * &o * &cache.tanh_c.mapv(|t| 1.0 - t * t));
    let mut dpre = Array1::zeros(4 * hs);
    dpre.slice_mut(s![..hs]).assign(&(&dc * &g * &i.mapv(|v| v * (1.0 - v))));
    dpre.slice_mut(s![hs..2 * hs]).assign(&(&dc * &cache.c_prev * &f.mapv(|v| v * (1.0 - v))));
    dpre.slice_mut(s![2 * hs..3 * hs]).assign(&(&dc * &i * &g.mapv(|v| 1.0 - v * v)));
    dpre.slice_mut(s![3 * hs..]).assign(&(dh * &cache.tanh_c * &o.mapv(|v| v * (1.0 - v))));
    add_outer(l.w.mat_mut(grad), &dpre, cache.xh.view());
    l.b.vec_mut(grad).scaled_add(1.0, &dpre);
    let dxh = l.w.mat(p).t().dot(&dpre);
    let dx = dxh.slice(s![..l.input]).to_owned();
    let dh_prev = dxh.slice(s![l.input..]).to_owned();
    let dc_prev = &dc * &f;
    (dx, dh_prev, dc_prev)
}

/// Scales `grad` in place so its L2 norm is at most `max_norm`; returns the original norm.
pub(crate) fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let k = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

#[derive(Debug, Clone)]
pub(crate) struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(size: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; size], v: vec![0.0; size] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            params[k] -= self.lr * (self.m[k] / bc1) / ((self.v[k] / bc2).sqrt() + self.eps);
        }
    }
}
