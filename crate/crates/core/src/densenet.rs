//! Fully-connected tanh network with inverted dropout on every layer input.
//!
//! Layer `l` computes `act(W_l · drop(h_{l-1}) + b_l)`; hidden layers use tanh and
//! the last layer uses [`OutputActivation`]. Dropout masks are a pure function of
//! `(seed, layer, unit)`, so a forward pass can be replayed exactly during
//! backpropagation or finite-difference checks.

mod adadelta;
mod dropout;
mod loss;
mod model_file;
mod train;

use rand::Rng;

use crate::error::{Error, Result};
use crate::{seed, Scalar};

pub use adadelta::{adadelta_step, AdaDelta, AdaDeltaConfig, Accumulators};
pub use dropout::{DropoutPlan, keep_unit};
pub use loss::{bce_loss, softmax_ce_loss, Loss, PROB_CLAMP};
pub use model_file::{decode_model, encode_model, load_model, save_model};
pub use train::{train, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    /// Embedding network: the last layer is another tanh layer.
    Tanh,
    /// Per-class logistic outputs, paired with [`Loss::Bce`].
    Sigmoid,
    /// Paired with [`Loss::SoftmaxCe`].
    Softmax,
}

impl OutputActivation {
    pub fn name(self) -> &'static str {
        match self {
            OutputActivation::Tanh => "tanh",
            OutputActivation::Sigmoid => "sigmoid",
            OutputActivation::Softmax => "softmax",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(OutputActivation::Tanh),
            "sigmoid" => Some(OutputActivation::Sigmoid),
            "softmax" => Some(OutputActivation::Softmax),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    /// `[d_0, d_1, ..., d_L]`: input width followed by every layer's width.
    pub layer_dims: Vec<usize>,
    /// Drop probability applied to every layer input, in `[0, 1)`.
    pub dropout: f64,
    pub output: OutputActivation,
    pub init_seed: u64,
}

impl NetSpec {
    pub fn new(layer_dims: Vec<usize>, dropout: f64, output: OutputActivation, init_seed: u64) -> Result<Self> {
        let spec = NetSpec {
            layer_dims,
            dropout,
            output,
            init_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The five-width on-top model `n_emb/128/512/n_emb/n_ids` with sigmoid outputs.
    pub fn on_top(n_emb: usize, n_ids: usize, dropout: f64, init_seed: u64) -> Result<Self> {
        Self::new(vec![n_emb, 128, 512, n_emb, n_ids], dropout, OutputActivation::Sigmoid, init_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::invalid("a network needs an input width and at least one layer"));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout probability {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.layer_dims.len() - 1
    }
}

/// One affine layer; `weights` is row-major `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<S> {
    pub weights: Vec<S>,
    pub bias: Vec<S>,
    in_dim: usize,
    out_dim: usize,
}

impl<S: Scalar> Layer<S> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            weights: vec![S::zero(); in_dim * out_dim],
            bias: vec![S::zero(); out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weight(&self, row: usize, col: usize) -> S {
        self.weights[row * self.in_dim + col]
    }

    /// `W · x + b`.
    pub fn affine(&self, x: &[S]) -> Vec<S> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &v)| acc + w * v))
            .collect()
    }
}

/// Per-parameter gradients in the same layout as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub layers: Vec<Layer<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(net: &DenseNet<S>) -> Self {
        Gradients {
            layers: net.layers.iter().map(|l| Layer::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<S>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, &y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, &y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: S) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|x| *x *= k);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> S {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .fold(S::zero(), |m, v| m.max(v.abs()))
    }
}

/// Every intermediate value of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations<S> {
    /// Input of each computed layer after dropout and rescaling.
    pub inputs: Vec<Vec<S>>,
    /// Keep mask applied to each layer input; `None` when dropout was off.
    pub masks: Vec<Option<Vec<bool>>>,
    /// Post-activation output of each computed layer.
    pub outputs: Vec<Vec<S>>,
}

impl<S> LayerActivations<S> {
    pub fn output(&self) -> &[S] {
        self.outputs.last().expect("at least one layer computed")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet<S> {
    spec: NetSpec,
    layers: Vec<Layer<S>>,
}

/// Glorot-uniform weights, zero biases, drawn in layer order from `init_seed`.
pub fn init_net<S: Scalar>(spec: &NetSpec) -> Result<DenseNet<S>> {
    spec.validate()?;
    let mut rng = seed::rng(spec.init_seed);
    let layers = spec
        .layer_dims
        .windows(2)
        .map(|w| {
            let (d_in, d_out) = (w[0], w[1]);
            let bound = (6.0 / (d_in + d_out) as f64).sqrt();
            let mut layer = Layer::zeros(d_in, d_out);
            for v in &mut layer.weights {
                // midpoint of a 53-bit cell: strictly inside (-bound, bound)
                let u = ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
                *v = S::of(bound * (2.0 * u - 1.0));
            }
            layer
        })
        .collect();
    Ok(DenseNet {
        spec: spec.clone(),
        layers,
    })
}

impl<S: Scalar> DenseNet<S> {
    /// Builds a network from explicit layers, checking shapes against `spec`.
    pub fn from_layers(spec: NetSpec, layers: Vec<Layer<S>>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.depth() {
            return Err(Error::DimensionMismatch {
                context: "layer count".into(),
                expected: spec.depth(),
                found: layers.len(),
            });
        }
        for (l, (layer, w)) in layers.iter().zip(spec.layer_dims.windows(2)).enumerate() {
            if layer.in_dim != w[0] || layer.out_dim != w[1] || layer.weights.len() != w[0] * w[1] || layer.bias.len() != w[1] {
                return Err(Error::invalid(format!("layer {l} shape does not match {}x{}", w[1], w[0])));
            }
            if !layer.weights.iter().chain(&layer.bias).all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {l} parameters")));
            }
        }
        Ok(DenseNet { spec, layers })
    }

    /// Layer from a row-major weight matrix; convenience for hand-built nets.
    pub fn layer_from_rows(rows: &[Vec<S>], bias: Vec<S>) -> Layer<S> {
        let in_dim = rows.first().map_or(0, Vec::len);
        Layer {
            weights: rows.iter().flatten().copied().collect(),
            bias,
            in_dim,
            out_dim: rows.len(),
        }
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<S>] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.spec.layer_dims.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// The first `depth` layers as a stand-alone embedding network (tanh output).
    ///
    /// Drops a classification head that is only needed for training.
    pub fn truncated(&self, depth: usize) -> Result<DenseNet<S>> {
        if depth == 0 || depth > self.depth() {
            return Err(Error::invalid(format!("cannot keep {depth} of {} layers", self.depth())));
        }
        let output = if depth == self.depth() { self.spec.output } else { OutputActivation::Tanh };
        let spec = NetSpec {
            layer_dims: self.spec.layer_dims[..=depth].to_vec(),
            output,
            ..self.spec.clone()
        };
        Ok(DenseNet {
            spec,
            layers: self.layers[..depth].to_vec(),
        })
    }

    fn check_input(&self, x: &[S]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input".into(),
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn activate(&self, layer: usize, z: Vec<S>) -> Vec<S> {
        if layer + 1 < self.depth() {
            return z.into_iter().map(S::tanh).collect();
        }
        match self.spec.output {
            OutputActivation::Tanh => z.into_iter().map(S::tanh).collect(),
            OutputActivation::Sigmoid => z.into_iter().map(crate::scalar::sigmoid).collect(),
            OutputActivation::Softmax => softmax(&z),
        }
    }

    /// Applies layer `layer` (dropout on its input, affine map, activation).
    pub fn apply_layer(&self, layer: usize, input: &[S], plan: DropoutPlan) -> (Vec<S>, Option<Vec<bool>>, Vec<S>) {
        let (dropped, mask) = dropout::apply(input, plan, layer, self.spec.dropout);
        let out = self.activate(layer, self.layers[layer].affine(&dropped));
        (dropped, mask, out)
    }

    /// Forward pass through the first `layers` layers.
    pub fn forward_partial(&self, x: &[S], plan: DropoutPlan, layers: usize) -> Result<LayerActivations<S>> {
        self.check_input(x)?;
        if layers == 0 || layers > self.depth() {
            return Err(Error::invalid(format!("cannot evaluate {layers} of {} layers", self.depth())));
        }
        let mut acts = LayerActivations {
            inputs: Vec::with_capacity(layers),
            masks: Vec::with_capacity(layers),
            outputs: Vec::with_capacity(layers),
        };
        let mut h = x.to_vec();
        for l in 0..layers {
            let (dropped, mask, out) = self.apply_layer(l, &h, plan);
            acts.inputs.push(dropped);
            acts.masks.push(mask);
            acts.outputs.push(out.clone());
            h = out;
        }
        Ok(acts)
    }

    pub fn forward(&self, x: &[S], plan: DropoutPlan) -> Result<LayerActivations<S>> {
        self.forward_partial(x, plan, self.depth())
    }

    /// Deterministic activation feeding the last layer (`x` itself for a one-layer net).
    pub fn penultimate(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_input(x)?;
        if self.depth() == 1 {
            return Ok(x.to_vec());
        }
        let acts = self.forward_partial(x, DropoutPlan::Off, self.depth() - 1)?;
        Ok(acts.outputs.last().unwrap().clone())
    }

    /// Exact gradients for the realized subnetwork, given `dL/dz` at the last
    /// layer's pre-activation.
    pub fn backward(&self, acts: &LayerActivations<S>, loss_grad: &[S]) -> Result<Gradients<S>> {
        if acts.outputs.len() != self.depth() || acts.inputs.len() != self.depth() {
            return Err(Error::DimensionMismatch {
                context: "activations (layers)".into(),
                expected: self.depth(),
                found: acts.outputs.len(),
            });
        }
        if loss_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "loss gradient".into(),
                expected: self.output_dim(),
                found: loss_grad.len(),
            });
        }
        let scale = dropout::scale::<S>(self.spec.dropout);
        let mut grads = Gradients::zeros_like(self);
        let mut delta = loss_grad.to_vec();
        for l in (0..self.depth()).rev() {
            let layer = &self.layers[l];
            let input = &acts.inputs[l];
            let g = &mut grads.layers[l];
            for (r, &d) in delta.iter().enumerate() {
                g.bias[r] = d;
                let row = &mut g.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                row.iter_mut().zip(input).for_each(|(w, &v)| *w = d * v);
            }
            if l == 0 {
                break;
            }
            // through W^T, the dropout mask, then tanh' of the previous layer
            let mut upstream = vec![S::zero(); layer.in_dim];
            for (r, &d) in delta.iter().enumerate() {
                let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                upstream.iter_mut().zip(row).for_each(|(u, &w)| *u += w * d);
            }
            if let Some(mask) = &acts.masks[l] {
                for (u, &keep) in upstream.iter_mut().zip(mask) {
                    *u = if keep { *u * scale } else { S::zero() };
                }
            }
            let prev = &acts.outputs[l - 1];
            delta = upstream
                .iter()
                .zip(prev)
                .map(|(&u, &h)| u * (S::one() - h * h))
                .collect();
        }
        Ok(grads)
    }
}

fn softmax<S: Scalar>(z: &[S]) -> Vec<S> {
    let max = z.iter().fold(S::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<S> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
