//! Dense feed-forward networks with `tanh` hidden layers.
//!
//! An [`Mlp`] maps an input vector to a vector of raw (linear) outputs. A
//! [`Scorer`] is an `Mlp` with exactly one output passed through the logistic
//! function, which is what every classifier in the crate uses. Adversaries
//! use a bare `Mlp` and apply their own output link.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// One affine layer. Weights are row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let z = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.bias[o];
            out.push(z);
        }
    }
}

/// Feed-forward network: `tanh` after every layer except the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Per-layer activations recorded by [`Mlp::trace`] for backpropagation.
///
/// `acts[0]` is the input, `acts[l + 1]` is the output of layer `l`
/// (post-`tanh` for hidden layers, raw for the last one).
#[derive(Debug, Clone)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace always holds the input")
    }
}

impl Mlp {
    /// Builds an all-zero network for the layer sizes `[in, h1, ..., out]`.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config("an mlp needs at least input and output sizes"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::config(format!("layer sizes must be positive, got {sizes:?}")));
        }
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Mlp { layers })
    }

    /// Symmetric uniform initialisation in `±1/sqrt(fan_in)`, seeded.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut rng = rng_from_seed(seed);
        net.randomize(&mut rng);
        Ok(net)
    }

    pub(crate) fn randomize(&mut self, rng: &mut Rng) {
        for layer in &mut self.layers {
            let limit = 1.0 / (layer.in_dim as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.random_range(-limit..limit);
            }
        }
    }

    /// Builds a network from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("an mlp needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::Shape {
                    context: "layer parameters",
                    expected: l.in_dim * l.out_dim,
                    found: l.weights.len(),
                });
            }
            if i > 0 && layers[i - 1].out_dim != l.in_dim {
                return Err(Error::Shape {
                    context: "layer chaining",
                    expected: layers[i - 1].out_dim,
                    found: l.in_dim,
                });
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape {
                context: "flat parameter vector",
                expected: self.num_params(),
                found: flat.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Raw outputs of the last layer.
    pub fn forward_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass that keeps every activation for [`Mlp::backprop`].
    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.out_dim);
            layer.affine(&acts[i], &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        Ok(Trace { acts })
    }

    /// Accumulates `d_out`-weighted parameter gradients into `grads` and
    /// returns the gradient with respect to the input.
    ///
    /// `d_out` is the gradient of the loss with respect to the raw outputs.
    pub fn backprop(&self, trace: &Trace, d_out: &[f64], grads: &mut GradSet) -> Vec<f64> {
        debug_assert_eq!(d_out.len(), self.output_dim());
        let mut delta = d_out.to_vec();
        let mut d_in = Vec::new();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.acts[l];
            let g = &mut grads.layers[l];
            d_in.clear();
            d_in.resize(layer.in_dim, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = o * layer.in_dim;
                g.bias[o] += d;
                for i in 0..layer.in_dim {
                    g.weights[row + i] += d * input[i];
                    d_in[i] += layer.weights[row + i] * d;
                }
            }
            if l > 0 {
                // input of layer l is tanh output of layer l - 1
                delta.clear();
                delta.extend(d_in.iter().zip(input).map(|(d, a)| d * (1.0 - a * a)));
            }
        }
        d_in
    }
}

/// Partial derivatives with the same shape as an [`Mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradSet {
    pub layers: Vec<Dense>,
}

impl GradSet {
    pub fn zeros_like(net: &Mlp) -> Self {
        GradSet {
            layers: net.layers.iter().map(|l| Dense::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    pub fn matches(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.in_dim == l.in_dim && g.out_dim == l.out_dim)
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|&v| v == 0.0))
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= factor);
        }
    }

    pub(crate) fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }
}

/// Numerically stable logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

const SCORE_FLOOR: f64 = f64::MIN_POSITIVE;
const SCORE_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

/// A binary classifier `S = h(X)`: an [`Mlp`] with one output and a
/// logistic link. Scores always lie strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    net: Mlp,
}

impl Scorer {
    pub fn new(net: Mlp) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::Shape {
                context: "scorer output",
                expected: 1,
                found: net.output_dim(),
            });
        }
        Ok(Scorer { net })
    }

    /// Seeded scorer with the given input dimension and hidden widths.
    pub fn init(input_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let sizes = layer_sizes(input_dim, hidden, 1);
        Scorer::new(Mlp::init(&sizes, seed)?)
    }

    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Result<Self> {
        Scorer::new(Mlp::zeros(&layer_sizes(input_dim, hidden, 1))?)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Pre-activation of the output unit.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        Ok(self.net.forward_raw(x)?[0])
    }

    /// The score `S` in `(0, 1)`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(clamp_score(logistic(self.logit(x)?)))
    }

    /// Scores a row-major feature matrix, keeping traces for backprop.
    pub fn forward_batch(&self, features: &[f64]) -> Result<ForwardPass> {
        let dim = self.input_dim();
        if features.len() % dim != 0 {
            return Err(Error::Shape {
                context: "row-major feature matrix",
                expected: dim,
                found: features.len() % dim,
            });
        }
        let mut traces = Vec::with_capacity(features.len() / dim);
        let mut scores = Vec::with_capacity(features.len() / dim);
        for row in features.chunks(dim) {
            let t = self.net.trace(row)?;
            scores.push(clamp_score(logistic(t.output()[0])));
            traces.push(t);
        }
        Ok(ForwardPass { traces, scores })
    }

    /// Scores every row of a row-major feature matrix.
    pub fn score_rows(&self, features: &[f64]) -> Result<Vec<f64>> {
        features.chunks(self.input_dim()).map(|r| self.score(r)).collect()
    }
}

fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_FLOOR, SCORE_CEIL)
}

pub(crate) fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

/// Result of [`Scorer::forward_batch`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    traces: Vec<Trace>,
    pub scores: Vec<f64>,
}

impl ForwardPass {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Backpropagates per-sample gradients with respect to the logits.
    pub fn backward_logits(&self, scorer: &Scorer, d_logits: &[f64]) -> Result<GradSet> {
        if d_logits.len() != self.len() {
            return Err(Error::Shape {
                context: "logit gradient",
                expected: self.len(),
                found: d_logits.len(),
            });
        }
        let mut grads = GradSet::zeros_like(&scorer.net);
        for (t, &d) in self.traces.iter().zip(d_logits) {
            if d != 0.0 {
                scorer.net.backprop(t, &[d], &mut grads);
            }
        }
        Ok(grads)
    }

    /// Converts gradients with respect to scores into gradients with respect
    /// to logits using `dS/dz = S (1 - S)`.
    pub fn score_to_logit_grads(&self, d_scores: &[f64]) -> Vec<f64> {
        self.scores
            .iter()
            .zip(d_scores)
            .map(|(s, d)| d * s * (1.0 - s))
            .collect()
    }
}
