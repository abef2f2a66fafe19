//! Small dense networks with exact reverse-mode gradients and Adadelta updates.
//!
//! Everything here is `f64` and single-threaded so that training runs are
//! bit-reproducible for a fixed seed.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("backward called without a cached forward pass")]
    NoForwardCache,
    #[error("network has no layers")]
    Empty,
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NnError::DimensionMismatch {
                context: "matrix construction",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(NnError::DimensionMismatch {
                    context: "matrix rows",
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Column vector from a slice.
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    /// Gathers the given rows into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Self> {
        if self.rows != other.rows {
            return Err(NnError::DimensionMismatch {
                context: "hstack rows",
                expected: self.rows,
                found: other.rows,
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Self {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Keeps the leading `cols` columns.
    pub fn leading_columns(&self, cols: usize) -> Self {
        let cols = cols.min(self.cols);
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[..cols]);
        }
        Self {
            rows: self.rows,
            cols,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            // NaN must propagate so divergence is detected downstream
            Activation::Relu => if x > 0.0 || x.is_nan() { x } else { 0.0 },
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Identity => 1.0,
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer computing `act(x W^T + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `output_dim x input_dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Dense {
    pub fn zeros(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            weights: vec![0.0; input_dim * output_dim],
            bias: vec![0.0; output_dim],
            activation,
            input_dim,
            output_dim,
        }
    }

    /// Glorot-uniform weights on `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        input_dim: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (input_dim + output_dim) as f64).sqrt();
        let weights = (0..input_dim * output_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            weights,
            bias: vec![0.0; output_dim],
            activation,
            input_dim,
            output_dim,
        }
    }

    fn pre_activation(&self, x: &Matrix) -> Matrix {
        let mut pre = Matrix::zeros(x.rows(), self.output_dim);
        for r in 0..x.rows() {
            let input = x.row(r);
            let out = pre.row_mut(r);
            for (o, slot) in out.iter_mut().enumerate() {
                let w = &self.weights[o * self.input_dim..(o + 1) * self.input_dim];
                let mut acc = self.bias[o];
                for (wi, xi) in w.iter().zip(input) {
                    acc += wi * xi;
                }
                *slot = acc;
            }
        }
        pre
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Matrix,
    pre: Matrix,
    output: Matrix,
}

/// Feed-forward stack of [`Dense`] layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Dense>,
    #[serde(skip)]
    cache: Option<Vec<LayerCache>>,
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl DenseNet {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NnError::Empty);
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim != pair[1].input_dim {
                return Err(NnError::DimensionMismatch {
                    context: "layer chaining",
                    expected: pair[0].output_dim,
                    found: pair[1].input_dim,
                });
            }
        }
        for layer in &layers {
            if layer.weights.len() != layer.input_dim * layer.output_dim
                || layer.bias.len() != layer.output_dim
            {
                return Err(NnError::DimensionMismatch {
                    context: "layer parameters",
                    expected: layer.input_dim * layer.output_dim,
                    found: layer.weights.len(),
                });
            }
        }
        Ok(Self {
            layers,
            cache: None,
        })
    }

    /// Glorot-initialised network from a list of widths and per-layer activations.
    pub fn glorot<R: Rng + ?Sized>(
        widths: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 || activations.len() != widths.len() - 1 {
            return Err(NnError::DimensionMismatch {
                context: "network widths",
                expected: widths.len().saturating_sub(1),
                found: activations.len(),
            });
        }
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Dense::glorot(w[0], w[1], act, rng))
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Every parameter in layer order (weights then bias per layer).
    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                context: "forward input",
                expected: self.input_dim(),
                found: x.cols(),
            });
        }
        Ok(())
    }

    /// Forward pass that caches intermediates for a following [`DenseNet::backward`].
    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let pre = layer.pre_activation(&current);
            let mut output = pre.clone();
            for v in output.as_mut_slice() {
                *v = layer.activation.apply(*v);
            }
            let next = output.clone();
            caches.push(LayerCache {
                input: current,
                pre,
                output,
            });
            current = next;
        }
        self.cache = Some(caches);
        Ok(current)
    }

    /// Forward pass without caching.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut current = x.clone();
        for layer in &self.layers {
            let mut out = layer.pre_activation(&current);
            for v in out.as_mut_slice() {
                *v = layer.activation.apply(*v);
            }
            current = out;
        }
        Ok(current)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    /// Reverse-mode pass of the cached forward. `upstream` is dL/d(output).
    pub fn backward(&self, upstream: &Matrix) -> Result<Backward> {
        let caches = self.cache.as_ref().ok_or(NnError::NoForwardCache)?;
        let last = &caches[caches.len() - 1].output;
        if upstream.rows() != last.rows() || upstream.cols() != last.cols() {
            return Err(NnError::DimensionMismatch {
                context: "backward upstream",
                expected: last.rows() * last.cols(),
                found: upstream.rows() * upstream.cols(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            // delta becomes dL/d(pre-activation)
            for ((d, &pre), &out) in delta
                .as_mut_slice()
                .iter_mut()
                .zip(cache.pre.as_slice())
                .zip(cache.output.as_slice())
            {
                *d *= layer.activation.derivative(pre, out);
            }
            let mut gw = vec![0.0; layer.weights.len()];
            let mut gb = vec![0.0; layer.bias.len()];
            let mut input_grad = Matrix::zeros(delta.rows(), layer.input_dim);
            for r in 0..delta.rows() {
                let d_row = delta.row(r);
                let x_row = cache.input.row(r);
                let gx = input_grad.row_mut(r);
                for (o, &d) in d_row.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let w = &layer.weights[o * layer.input_dim..(o + 1) * layer.input_dim];
                    let gw_row = &mut gw[o * layer.input_dim..(o + 1) * layer.input_dim];
                    for i in 0..layer.input_dim {
                        gw_row[i] += d * x_row[i];
                        gx[i] += d * w[i];
                    }
                }
            }
            grads.push(LayerGradient {
                weights: gw,
                bias: gb,
            });
            delta = input_grad;
        }
        grads.reverse();
        Ok(Backward {
            gradients: Gradients { layers: grads },
            input_grad: delta,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients, shape-matched to a [`DenseNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn matches(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }
}

/// Output of [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct Backward {
    pub gradients: Gradients,
    /// dL/d(input), used to chain networks.
    pub input_grad: Matrix,
}

/// Adadelta hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaConfig {
    pub rho: f64,
    pub epsilon: f64,
    pub lr: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        Self {
            rho: 0.95,
            epsilon: 1e-6,
            lr: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Accumulators {
    sq_grad: Vec<f64>,
    sq_update: Vec<f64>,
}

impl Accumulators {
    fn zeros(n: usize) -> Self {
        Self {
            sq_grad: vec![0.0; n],
            sq_update: vec![0.0; n],
        }
    }
}

/// Per-parameter Adadelta accumulators for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaState {
    pub config: AdadeltaConfig,
    weights: Vec<Accumulators>,
    bias: Vec<Accumulators>,
}

impl AdadeltaState {
    pub fn new(net: &DenseNet, config: AdadeltaConfig) -> Self {
        Self {
            config,
            weights: net
                .layers
                .iter()
                .map(|l| Accumulators::zeros(l.weights.len()))
                .collect(),
            bias: net
                .layers
                .iter()
                .map(|l| Accumulators::zeros(l.bias.len()))
                .collect(),
        }
    }

    /// Applies one Adadelta update to `net` in place.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if !grads.matches(net) || self.weights.len() != net.layers.len() {
            return Err(NnError::DimensionMismatch {
                context: "adadelta step",
                expected: net.parameter_count(),
                found: grads.flat().len(),
            });
        }
        let cfg = self.config;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let acc = &mut self.weights[i];
            adadelta_update(
                &cfg,
                &mut layer.weights,
                &grads.layers[i].weights,
                &mut acc.sq_grad,
                &mut acc.sq_update,
            )?;
            let acc = &mut self.bias[i];
            adadelta_update(
                &cfg,
                &mut layer.bias,
                &grads.layers[i].bias,
                &mut acc.sq_grad,
                &mut acc.sq_update,
            )?;
        }
        Ok(())
    }

    /// All accumulator values, for invariant checks.
    pub fn accumulators(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .chain(&self.bias)
            .flat_map(|a| a.sq_grad.iter().chain(&a.sq_update).copied())
    }
}

/// Adadelta on flat slices:
/// `E[g²] ← ρE[g²] + (1-ρ)g²`, `Δ = -sqrt(E[Δ²]+ε)/sqrt(E[g²]+ε)·g`,
/// `E[Δ²] ← ρE[Δ²] + (1-ρ)Δ²`, `θ ← θ + lr·Δ`.
pub fn adadelta_update(
    cfg: &AdadeltaConfig,
    params: &mut [f64],
    grads: &[f64],
    sq_grad: &mut [f64],
    sq_update: &mut [f64],
) -> Result<()> {
    let n = params.len();
    for (len, ctx) in [
        (grads.len(), "adadelta gradients"),
        (sq_grad.len(), "adadelta accumulator"),
        (sq_update.len(), "adadelta accumulator"),
    ] {
        if len != n {
            return Err(NnError::DimensionMismatch {
                context: ctx,
                expected: n,
                found: len,
            });
        }
    }
    for i in 0..n {
        let g = grads[i];
        sq_grad[i] = cfg.rho * sq_grad[i] + (1.0 - cfg.rho) * g * g;
        let delta = -((sq_update[i] + cfg.epsilon).sqrt() / (sq_grad[i] + cfg.epsilon).sqrt()) * g;
        sq_update[i] = cfg.rho * sq_update[i] + (1.0 - cfg.rho) * delta * delta;
        params[i] += cfg.lr * delta;
    }
    Ok(())
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean binary cross-entropy with probabilities clamped away from 0 and 1.
pub fn cross_entropy(pred: &[f64], target: &[u8]) -> f64 {
    assert_eq!(pred.len(), target.len(), "cross_entropy length mismatch");
    if pred.is_empty() {
        return 0.0;
    }
    let total: f64 = pred
        .iter()
        .zip(target)
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / pred.len() as f64
}

/// d(cross_entropy)/d(pred). Zero where the clamp is active.
pub fn cross_entropy_grad(pred: &[f64], target: &[u8]) -> Vec<f64> {
    assert_eq!(pred.len(), target.len(), "cross_entropy length mismatch");
    let n = pred.len() as f64;
    pred.iter()
        .zip(target)
        .map(|(&p, &y)| {
            if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                return 0.0;
            }
            if y == 1 {
                -1.0 / (p * n)
            } else {
                1.0 / ((1.0 - p) * n)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = Dense {
            weights: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0, 0.0],
            activation: Activation::Identity,
            input_dim: 2,
            output_dim: 2,
        };
        let net = DenseNet::new(vec![layer]).unwrap();
        let out = net.predict(&Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_sigmoid_layer_gives_half() {
        let net = DenseNet::new(vec![Dense::zeros(3, 2, Activation::Sigmoid)]).unwrap();
        let x = Matrix::from_rows(&[vec![5.0, -3.0, 100.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert!(net.predict(&x).unwrap().as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn two_layer_matches_scalar_recomputation() {
        let mut r = rng(7);
        let net =
            DenseNet::glorot(&[3, 4, 2], &[Activation::Relu, Activation::Identity], &mut r).unwrap();
        let mut layers = net.layers().to_vec();
        for l in &mut layers {
            for b in &mut l.bias {
                *b = r.random_range(-0.5..0.5);
            }
        }
        let net = DenseNet::new(layers).unwrap();
        let x = [0.3, -1.2, 2.5];
        let out = net.predict(&Matrix::from_rows(&[x.to_vec()]).unwrap()).unwrap();

        let (l1, l2) = (&net.layers()[0], &net.layers()[1]);
        let mut hidden = [0.0; 4];
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut s = l1.bias[j];
            for (i, xi) in x.iter().enumerate() {
                s += l1.weights[j * 3 + i] * xi;
            }
            *h = if s > 0.0 { s } else { 0.0 };
        }
        for k in 0..2 {
            let mut s = l2.bias[k];
            for (j, hj) in hidden.iter().enumerate() {
                s += l2.weights[k * 4 + j] * hj;
            }
            assert!((out.get(0, k) - s).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let mut net = DenseNet::new(vec![Dense::zeros(3, 1, Activation::Identity)]).unwrap();
        let err = net.forward(&Matrix::zeros(2, 4)).unwrap_err();
        assert!(matches!(err, NnError::DimensionMismatch { .. }));
    }

    #[test]
    fn backward_without_forward_is_error() {
        let net = DenseNet::new(vec![Dense::zeros(3, 1, Activation::Identity)]).unwrap();
        assert_eq!(
            net.backward(&Matrix::zeros(1, 1)).unwrap_err(),
            NnError::NoForwardCache
        );
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut net =
            DenseNet::glorot(&[3, 5, 1], &[Activation::Relu, Activation::Sigmoid], &mut rng(1))
                .unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]).unwrap();
        net.forward(&x).unwrap();
        let back = net.backward(&Matrix::zeros(2, 1)).unwrap();
        assert!(back.gradients.flat().iter().all(|&g| g == 0.0));
        assert!(back.input_grad.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dead_relu_blocks_gradient() {
        let layer = Dense {
            weights: vec![1.0],
            bias: vec![-5.0],
            activation: Activation::Relu,
            input_dim: 1,
            output_dim: 1,
        };
        let mut net = DenseNet::new(vec![layer]).unwrap();
        net.forward(&Matrix::column(&[1.0])).unwrap();
        let back = net.backward(&Matrix::column(&[1.0])).unwrap();
        assert_eq!(back.gradients.flat(), vec![0.0, 0.0]);
        assert_eq!(back.input_grad.as_slice(), &[0.0]);
    }

    #[test]
    fn scalar_net_gradient_matches_central_difference() {
        let layer = Dense {
            weights: vec![0.7],
            bias: vec![-0.2],
            activation: Activation::Sigmoid,
            input_dim: 1,
            output_dim: 1,
        };
        let mut net = DenseNet::new(vec![layer]).unwrap();
        let x = Matrix::column(&[1.3]);
        net.forward(&x).unwrap();
        let back = net.backward(&Matrix::column(&[1.0])).unwrap();
        let h = 1e-5;
        let eval = |w: f64, b: f64| sigmoid(w * 1.3 + b);
        let fd_w = (eval(0.7 + h, -0.2) - eval(0.7 - h, -0.2)) / (2.0 * h);
        let fd_b = (eval(0.7, -0.2 + h) - eval(0.7, -0.2 - h)) / (2.0 * h);
        let g = back.gradients.flat();
        assert!(((g[0] - fd_w) / fd_w).abs() < 1e-4);
        assert!(((g[1] - fd_b) / fd_b).abs() < 1e-4);
    }

    #[test]
    fn forward_is_bit_reproducible() {
        let mut net =
            DenseNet::glorot(&[4, 6, 3], &[Activation::Relu, Activation::Sigmoid], &mut rng(3))
                .unwrap();
        let x = Matrix::from_rows(&[vec![0.1, 0.2, -0.3, 4.0]]).unwrap();
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        let c = net.predict(&x).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn adadelta_zero_gradient_leaves_parameters() {
        let mut params = vec![0.3, -1.0];
        let mut sg = vec![0.0; 2];
        let mut su = vec![0.0; 2];
        let cfg = AdadeltaConfig::default();
        for _ in 0..5 {
            adadelta_update(&cfg, &mut params, &[0.0, 0.0], &mut sg, &mut su).unwrap();
        }
        assert_eq!(params, vec![0.3, -1.0]);
    }

    #[test]
    fn adadelta_first_step_closed_form() {
        let cfg = AdadeltaConfig::default();
        let g = 0.37;
        let mut p = [0.0];
        adadelta_update(&cfg, &mut p, &[g], &mut [0.0], &mut [0.0]).unwrap();
        let expected = -cfg.lr * cfg.epsilon.sqrt() / ((1.0 - cfg.rho) * g * g + cfg.epsilon).sqrt() * g;
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn adadelta_rejects_shape_mismatch() {
        let cfg = AdadeltaConfig::default();
        let err = adadelta_update(&cfg, &mut [0.0, 1.0], &[1.0], &mut [0.0; 2], &mut [0.0; 2]);
        assert!(err.is_err());
        let net = DenseNet::new(vec![Dense::zeros(2, 1, Activation::Identity)]).unwrap();
        let other = DenseNet::new(vec![Dense::zeros(3, 1, Activation::Identity)]).unwrap();
        let mut state = AdadeltaState::new(&net, cfg);
        let mut net = net;
        assert!(state.step(&mut net, &Gradients::zeros_like(&other)).is_err());
    }

    #[test]
    fn adadelta_constant_gradient_reaches_fixed_point() {
        // Fixed point of the recurrence: E[g²] = g², E[Δ²] = g², hence |Δ| = |g|·lr.
        // Approach time scales like g²/((1-ρ)ε), so use a small gradient.
        let cfg = AdadeltaConfig::default();
        let g = 1e-3;
        let (mut sg, mut su) = ([0.0], [0.0]);
        let mut p = [0.0];
        let mut steps = Vec::new();
        for _ in 0..10_000 {
            let before = p[0];
            adadelta_update(&cfg, &mut p, &[g], &mut sg, &mut su).unwrap();
            steps.push(before - p[0]);
        }
        let last = steps[steps.len() - 1];
        assert!(((last - steps[steps.len() - 2]) / last).abs() < 1e-9);
        assert!((last / (cfg.lr * g) - 1.0).abs() < 1e-6, "{last}");
    }

    #[test]
    fn cross_entropy_examples() {
        assert!((cross_entropy(&[0.5, 0.5, 0.5], &[1, 0, 1]) - 2f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(&[1.0, 0.0], &[1, 0]) <= 1e-6);
        let expected = (-(0.9f64.ln()) - 0.8f64.ln()) / 2.0;
        assert!((cross_entropy(&[0.9, 0.2], &[1, 0]) - expected).abs() < 1e-15);
        assert!((expected - 0.1643).abs() < 1e-4);
    }
}
