use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::error::{MelError, Result};

/// A differentiable model family with a flat parameter vector.
pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn num_params(&self) -> usize;
    fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64>
    where
        Self: Sized;
    /// Mean per-sample loss over `data`.
    fn loss(&self, w: &[f64], data: &Dataset) -> f64;
    /// Gradient of [`Backend::loss`].
    fn gradient(&self, w: &[f64], data: &Dataset) -> Vec<f64>;
    /// Fraction of correct predictions, for classifiers.
    fn accuracy(&self, _w: &[f64], _data: &Dataset) -> Option<f64> {
        None
    }
}

/// Least squares `(1/d) sum (w^T x - y)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearRegression {
    pub features: usize,
}

impl Backend for LinearRegression {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn num_params(&self) -> usize {
        self.features
    }

    fn init<R: Rng + ?Sized>(&self, _rng: &mut R) -> Vec<f64> {
        vec![0.0; self.features]
    }

    fn loss(&self, w: &[f64], data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..data.len() {
            let r = dot(w, data.row(i)) - data.targets[i];
            s += r * r;
        }
        s / data.len() as f64
    }

    fn gradient(&self, w: &[f64], data: &Dataset) -> Vec<f64> {
        let mut g = vec![0.0; w.len()];
        if data.is_empty() {
            return g;
        }
        let scale = 2.0 / data.len() as f64;
        for i in 0..data.len() {
            let x = data.row(i);
            let r = dot(w, x) - data.targets[i];
            for (gj, xj) in g.iter_mut().zip(x) {
                *gj += scale * r * xj;
            }
        }
        g
    }
}

/// One tanh hidden layer, softmax output, mean cross-entropy.
///
/// Parameter layout: `W1 (hidden x inputs)`, `b1`, `W2 (classes x hidden)`, `b2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Mlp {
    fn split<'a>(&self, w: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (w1, rest) = w.split_at(self.hidden * self.inputs);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.classes * self.hidden);
        (w1, b1, w2, b2)
    }

    fn forward(&self, w: &[f64], x: &[f64], hidden: &mut [f64], probs: &mut [f64]) {
        let (w1, b1, w2, b2) = self.split(w);
        for h in 0..self.hidden {
            hidden[h] = (b1[h] + dot(&w1[h * self.inputs..(h + 1) * self.inputs], x)).tanh();
        }
        for c in 0..self.classes {
            probs[c] = b2[c] + dot(&w2[c * self.hidden..(c + 1) * self.hidden], hidden);
        }
        let m = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for p in probs.iter_mut() {
            *p = (*p - m).exp();
            z += *p;
        }
        for p in probs.iter_mut() {
            *p /= z;
        }
    }
}

impl Backend for Mlp {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn num_params(&self) -> usize {
        self.hidden * self.inputs + self.hidden + self.classes * self.hidden + self.classes
    }

    fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n1 = Normal::new(0.0, 1.0 / (self.inputs as f64).sqrt()).expect("positive sd");
        let n2 = Normal::new(0.0, 1.0 / (self.hidden as f64).sqrt()).expect("positive sd");
        let mut w = Vec::with_capacity(self.num_params());
        w.extend((0..self.hidden * self.inputs).map(|_| n1.sample(rng)));
        w.extend(std::iter::repeat_n(0.0, self.hidden));
        w.extend((0..self.classes * self.hidden).map(|_| n2.sample(rng)));
        w.extend(std::iter::repeat_n(0.0, self.classes));
        w
    }

    fn loss(&self, w: &[f64], data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let mut hidden = vec![0.0; self.hidden];
        let mut probs = vec![0.0; self.classes];
        let mut s = 0.0;
        for i in 0..data.len() {
            self.forward(w, data.row(i), &mut hidden, &mut probs);
            s -= probs[data.label(i)].max(f64::MIN_POSITIVE).ln();
        }
        s / data.len() as f64
    }

    fn gradient(&self, w: &[f64], data: &Dataset) -> Vec<f64> {
        let mut g = vec![0.0; w.len()];
        if data.is_empty() {
            return g;
        }
        let (_, _, w2, _) = self.split(w);
        let o_b1 = self.hidden * self.inputs;
        let o_w2 = o_b1 + self.hidden;
        let o_b2 = o_w2 + self.classes * self.hidden;
        let scale = 1.0 / data.len() as f64;
        let mut hidden = vec![0.0; self.hidden];
        let mut probs = vec![0.0; self.classes];
        let mut dh = vec![0.0; self.hidden];
        for i in 0..data.len() {
            let x = data.row(i);
            self.forward(w, x, &mut hidden, &mut probs);
            probs[data.label(i)] -= 1.0;
            dh.iter_mut().for_each(|v| *v = 0.0);
            for c in 0..self.classes {
                let delta = probs[c] * scale;
                g[o_b2 + c] += delta;
                for h in 0..self.hidden {
                    g[o_w2 + c * self.hidden + h] += delta * hidden[h];
                    dh[h] += delta * w2[c * self.hidden + h];
                }
            }
            for h in 0..self.hidden {
                let pre = dh[h] * (1.0 - hidden[h] * hidden[h]);
                g[o_b1 + h] += pre;
                for (j, xj) in x.iter().enumerate() {
                    g[h * self.inputs + j] += pre * xj;
                }
            }
        }
        g
    }

    fn accuracy(&self, w: &[f64], data: &Dataset) -> Option<f64> {
        if data.is_empty() {
            return None;
        }
        let mut hidden = vec![0.0; self.hidden];
        let mut probs = vec![0.0; self.classes];
        let mut hits = 0;
        for i in 0..data.len() {
            self.forward(w, data.row(i), &mut hidden, &mut probs);
            let best = (0..self.classes).max_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap_or(0);
            if best == data.label(i) {
                hits += 1;
            }
        }
        Some(hits as f64 / data.len() as f64)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One full-batch gradient step on the local loss.
pub fn local_update<B: Backend>(backend: &B, w: &[f64], batch: &Dataset, eta: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(MelError::InvalidInput("local update needs a nonempty batch".into()));
    }
    let g = backend.gradient(w, batch);
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(MelError::Numerical(format!(
            "non-finite gradient component {i} ({}) with |w|_max = {:.3e}",
            g[i],
            w.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        )));
    }
    Ok(w.iter().zip(&g).map(|(wi, gi)| wi - eta * gi).collect())
}

/// Mean per-sample loss on the learner's data.
pub fn local_loss<B: Backend>(backend: &B, w: &[f64], data: &Dataset) -> f64 {
    backend.loss(w, data)
}
