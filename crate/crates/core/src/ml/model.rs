//! Fully connected networks on a flat parameter vector, and mini-batch SGD.
//!
//! Layer `l` occupies `fan_out·fan_in` weights (row-major, one row per output
//! unit) followed by `fan_out` biases; layers are stored back to back.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    BinaryCrossEntropy,
    CategoricalCrossEntropy,
}

/// Anything SGD can train: a loss over selected rows of a dataset.
pub trait Model: Sync {
    fn n_params(&self) -> usize;

    /// Mean loss over `rows`; the gradient of that mean is written to `grad`.
    fn loss_grad(&self, w: &[f64], data: &Dataset, rows: &[usize], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Input width followed by the width of every layer.
    pub widths: Vec<usize>,
    /// One activation per layer.
    pub activations: Vec<Activation>,
    pub loss: Loss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ModelSpec {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>, loss: Loss) -> Result<Self> {
        let spec = ModelSpec { widths, activations, loss };
        spec.validate()?;
        Ok(spec)
    }

    /// `input → hidden… → classes`, with a sigmoid/BCE head for two classes
    /// and softmax/CCE otherwise.
    pub fn mlp(input: usize, hidden: &[usize], hidden_act: Activation, classes: usize) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        let mut acts = vec![hidden_act; hidden.len()];
        if classes == 2 {
            widths.push(1);
            acts.push(Activation::Sigmoid);
            ModelSpec::new(widths, acts, Loss::BinaryCrossEntropy)
        } else {
            widths.push(classes);
            acts.push(Activation::Softmax);
            ModelSpec::new(widths, acts, Loss::CategoricalCrossEntropy)
        }
    }

    pub fn logistic_regression(input: usize) -> Self {
        ModelSpec::new(vec![input, 1], vec![Activation::Sigmoid], Loss::BinaryCrossEntropy)
            .expect("logistic regression spec is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::Config("a model needs an input width and at least one non-empty layer".into()));
        }
        if self.activations.len() != self.widths.len() - 1 {
            return Err(Error::Config(format!(
                "{} layers but {} activations",
                self.widths.len() - 1,
                self.activations.len()
            )));
        }
        let (hidden, head) = self.activations.split_at(self.activations.len() - 1);
        if hidden.contains(&Activation::Softmax) {
            return Err(Error::Config("softmax is only supported on the output layer".into()));
        }
        let out = *self.widths.last().unwrap();
        match (self.loss, head[0]) {
            (Loss::BinaryCrossEntropy, Activation::Sigmoid) if out == 1 => Ok(()),
            (Loss::CategoricalCrossEntropy, Activation::Softmax) if out >= 2 => Ok(()),
            _ => Err(Error::Config(
                "output layer must be sigmoid(1)+binary cross-entropy or softmax(≥2)+categorical cross-entropy".into(),
            )),
        }
    }

    pub fn n_params(&self) -> usize {
        self.widths.windows(2).map(|p| (p[0] + 1) * p[1]).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// `(fan_in, fan_out, offset)` for each layer.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.widths.windows(2).map(move |p| {
            let at = offset;
            offset += (p[0] + 1) * p[1];
            (p[0], p[1], at)
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut w = vec![0.0; self.n_params()];
        for (fan_in, fan_out, at) in self.layers() {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut w[at..at + fan_in * fan_out] {
                *v = rng.random_range(-limit..limit);
            }
        }
        w
    }

    pub fn unpack(&self, w: &[f64]) -> Result<Vec<LayerParams>> {
        self.check_len(w)?;
        Ok(self
            .layers()
            .map(|(fan_in, fan_out, at)| {
                let nw = fan_in * fan_out;
                LayerParams {
                    fan_in,
                    fan_out,
                    weights: w[at..at + nw].to_vec(),
                    bias: w[at + nw..at + nw + fan_out].to_vec(),
                }
            })
            .collect())
    }

    pub fn pack(&self, layers: &[LayerParams]) -> Result<Vec<f64>> {
        let shapes: Vec<_> = self.layers().map(|(i, o, _)| (i, o)).collect();
        let given: Vec<_> = layers.iter().map(|l| (l.fan_in, l.fan_out)).collect();
        if shapes != given || layers.iter().any(|l| l.weights.len() != l.fan_in * l.fan_out || l.bias.len() != l.fan_out) {
            return Err(Error::invalid("layer shapes do not match the model"));
        }
        Ok(layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect())
    }

    fn check_len(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n_params() {
            return Err(Error::invalid(format!("expected {} parameters, got {}", self.n_params(), w.len())));
        }
        Ok(())
    }

    // Output-layer pre-activations (logits) plus every layer's activations.
    fn forward_trace(&self, w: &[f64], x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.resize(self.widths.len(), Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(x);
        for (l, (fan_in, fan_out, at)) in self.layers().enumerate() {
            let (prev, next) = acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            out.clear();
            let bias = &w[at + fan_in * fan_out..at + fan_in * fan_out + fan_out];
            for o in 0..fan_out {
                let row = &w[at + o * fan_in..at + (o + 1) * fan_in];
                out.push(bias[o] + row.iter().zip(input.iter()).map(|(a, b)| a * b).sum::<f64>());
            }
            match self.activations[l] {
                Activation::Relu => out.iter_mut().for_each(|z| *z = z.max(0.0)),
                Activation::Sigmoid if l + 1 < self.activations.len() => {
                    out.iter_mut().for_each(|z| *z = sigmoid(*z))
                }
                // The head keeps logits; the loss applies its own link.
                _ => {}
            }
        }
    }

    /// Class probabilities for one record: `[P(1)]` for a binary head.
    pub fn predict(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let mut acts = Vec::new();
        self.forward_trace(w, x, &mut acts);
        let mut z = acts.pop().unwrap();
        match self.loss {
            Loss::BinaryCrossEntropy => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Loss::CategoricalCrossEntropy => softmax_in_place(&mut z),
        }
        z
    }

    /// Mean loss over `rows` (no gradient).
    pub fn loss(&self, w: &[f64], data: &Dataset, rows: &[usize]) -> f64 {
        let mut acts = Vec::new();
        let total: f64 = rows
            .iter()
            .map(|&r| {
                self.forward_trace(w, data.row(r), &mut acts);
                self.head_loss(acts.last().unwrap(), data.labels[r], None)
            })
            .sum();
        total / rows.len().max(1) as f64
    }

    // Loss from logits; optionally writes dLoss/dlogits.
    fn head_loss(&self, z: &[f64], label: usize, delta: Option<&mut Vec<f64>>) -> f64 {
        match self.loss {
            Loss::BinaryCrossEntropy => {
                let y = if label > 0 { 1.0 } else { 0.0 };
                if let Some(d) = delta {
                    d.clear();
                    d.push(sigmoid(z[0]) - y);
                }
                softplus(z[0]) - y * z[0]
            }
            Loss::CategoricalCrossEntropy => {
                let lse = log_sum_exp(z);
                if let Some(d) = delta {
                    d.clear();
                    d.extend(z.iter().map(|v| (v - lse).exp()));
                    d[label] -= 1.0;
                }
                lse - z[label]
            }
        }
    }
}

impl Model for ModelSpec {
    fn n_params(&self) -> usize {
        ModelSpec::n_params(self)
    }

    fn loss_grad(&self, w: &[f64], data: &Dataset, rows: &[usize], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let layers: Vec<_> = self.layers().collect();
        let mut acts = Vec::new();
        let mut delta = Vec::new();
        let mut back = Vec::new();
        let mut total = 0.0;
        for &r in rows {
            self.forward_trace(w, data.row(r), &mut acts);
            total += self.head_loss(acts.last().unwrap(), data.labels[r], Some(&mut delta));
            for l in (0..layers.len()).rev() {
                let (fan_in, fan_out, at) = layers[l];
                let input = &acts[l];
                for o in 0..fan_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut grad[at + o * fan_in..at + (o + 1) * fan_in];
                    row.iter_mut().zip(input.iter()).for_each(|(g, a)| *g += d * a);
                    grad[at + fan_in * fan_out + o] += d;
                }
                if l == 0 {
                    break;
                }
                back.clear();
                back.resize(fan_in, 0.0);
                for o in 0..fan_out {
                    let d = delta[o];
                    if d != 0.0 {
                        let row = &w[at + o * fan_in..at + (o + 1) * fan_in];
                        back.iter_mut().zip(row).for_each(|(b, wv)| *b += d * wv);
                    }
                }
                // `input` holds the previous layer's post-activation values.
                match self.activations[l - 1] {
                    Activation::Relu => back.iter_mut().zip(input).for_each(|(b, a)| {
                        if *a <= 0.0 {
                            *b = 0.0
                        }
                    }),
                    Activation::Sigmoid => back.iter_mut().zip(input).for_each(|(b, a)| *b *= a * (1.0 - a)),
                    Activation::Softmax => unreachable!("validated: softmax only on the head"),
                }
                std::mem::swap(&mut delta, &mut back);
            }
        }
        let inv = 1.0 / rows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        total * inv
    }
}

/// `epochs` passes of mini-batch SGD over `rows`, reshuffled each epoch.
pub fn sgd<M: Model + ?Sized, R: RngCore + ?Sized>(
    model: &M,
    data: &Dataset,
    rows: &[usize],
    w: &mut [f64],
    epochs: usize,
    eta: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<()> {
    if w.len() != model.n_params() {
        return Err(Error::invalid(format!("expected {} parameters, got {}", model.n_params(), w.len())));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut order = rows.to_vec();
    let mut grad = vec![0.0; w.len()];
    for _ in 0..epochs {
        order.shuffle(rng);
        for batch in order.chunks(batch_size) {
            let loss = model.loss_grad(w, data, batch, &mut grad);
            if !loss.is_finite() {
                return Err(Error::numeric(format!("training loss became {loss}")));
            }
            w.iter_mut().zip(&grad).for_each(|(wi, g)| *wi -= eta * g);
        }
    }
    Ok(())
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax_in_place(z: &mut [f64]) {
    let lse = log_sum_exp(z);
    z.iter_mut().for_each(|v| *v = (*v - lse).exp());
}
