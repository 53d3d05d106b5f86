//! Feed-forward networks built from affine layers followed by ReLU or
//! identity activations.
//!
//! Layer `k` maps the previous post-activation vector `z_{k-1}` (the input
//! `x` for `k = 0`) to the pre-activation `ẑ_k = W_k z_{k-1} + b_k`, then
//! applies its activation to obtain `z_k`. The final layer is always an
//! identity layer, so the network output is affine in the last hidden layer.

mod nnet;

pub use nnet::{load_nnet, parse_nnet, write_nnet, write_nnet_file};

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in &rows {
            check_dim("matrix row", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.row_iter().map(|row| dot(row, v)).collect()
    }

    /// `selfᵀ * v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &vi) in self.row_iter().zip(v) {
            if vi == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += w * vi;
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        check_dim("layer biases", weights.rows(), biases.len())?;
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    /// Pre-activation `W z + b`.
    pub fn affine(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.weights.mul_vec(z);
        for (o, b) in out.iter_mut().zip(&self.biases) {
            *o += b;
        }
        out
    }

    pub fn activate(&self, pre: &[f64]) -> Vec<f64> {
        match self.activation {
            Activation::Relu => pre.iter().map(|&v| v.max(0.0)).collect(),
            Activation::Identity => pre.to_vec(),
        }
    }
}

/// NNet-style input/output normalization metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    pub input_mean: Vec<f64>,
    pub input_range: Vec<f64>,
    pub output_mean: f64,
    pub output_range: f64,
}

/// A ReLU node, addressed by its position among the ReLU layers of a
/// network and its index within that layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: usize,
    pub node: usize,
}

impl NodeId {
    pub fn new(layer: usize, node: usize) -> Self {
        Self { layer, node }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.layer, self.node)
    }
}

/// Pre- and post-activation values of every layer for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().map_or(&self.input, Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<Layer>,
    normalization: Option<Normalization>,
    relu_layers: Vec<usize>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidNetwork("network has no layers".into()))?;
        let input_dim = first.input_dim();
        if input_dim == 0 {
            return Err(Error::InvalidNetwork("input dimension is zero".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[1].input_dim() != pair[0].output_dim() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} has {} columns but layer {} has {} rows",
                    k + 1,
                    pair[1].input_dim(),
                    k,
                    pair[0].output_dim()
                )));
            }
        }
        let last = layers.last().expect("nonempty");
        if last.activation != Activation::Identity {
            return Err(Error::InvalidNetwork(
                "final layer must use the identity activation".into(),
            ));
        }
        let output_dim = last.output_dim();
        if output_dim == 0 {
            return Err(Error::InvalidNetwork("output dimension is zero".into()));
        }
        let relu_layers = layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.activation == Activation::Relu)
            .map(|(k, _)| k)
            .collect();
        Ok(Self {
            input_dim,
            output_dim,
            layers,
            normalization: None,
            relu_layers,
        })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Result<Self> {
        let n = self.input_dim;
        check_dim("input_min", n, normalization.input_min.len())?;
        check_dim("input_max", n, normalization.input_max.len())?;
        check_dim("input_mean", n, normalization.input_mean.len())?;
        check_dim("input_range", n, normalization.input_range.len())?;
        self.normalization = Some(normalization);
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    /// Indices into [`Network::layers`] of the ReLU layers, in order.
    pub fn relu_layers(&self) -> &[usize] {
        &self.relu_layers
    }

    pub fn relu_layer_width(&self, relu_layer: usize) -> usize {
        self.layers[self.relu_layers[relu_layer]].output_dim()
    }

    pub fn relu_count(&self) -> usize {
        self.relu_layers
            .iter()
            .map(|&k| self.layers[k].output_dim())
            .sum()
    }

    /// All ReLU nodes in topological order.
    pub fn relu_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.relu_layers
            .iter()
            .enumerate()
            .flat_map(move |(r, &k)| {
                (0..self.layers[k].output_dim()).map(move |j| NodeId::new(r, j))
            })
    }

    pub fn check_node(&self, id: NodeId) -> Result<()> {
        if id.layer < self.relu_layers.len() && id.node < self.relu_layer_width(id.layer) {
            Ok(())
        } else {
            Err(Error::InconsistentState(format!("node {id} out of range")))
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("network input", self.input_dim, x.len())?;
        let mut z = x.to_vec();
        for layer in &self.layers {
            z = layer.activate(&layer.affine(&z));
        }
        Ok(z)
    }

    /// Forward pass that keeps every intermediate `ẑ` and `z`.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        check_dim("network input", self.input_dim, x.len())?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z_in = post.last().map_or(x, Vec::as_slice);
            let zhat = layer.affine(z_in);
            let z = layer.activate(&zhat);
            pre.push(zhat);
            post.push(z);
        }
        Ok(ForwardTrace {
            input: x.to_vec(),
            pre,
            post,
        })
    }

    /// Evaluation with the stored normalization applied: inputs are clipped
    /// to `[input_min, input_max]` and standardized, outputs are scaled back.
    /// Falls back to raw evaluation when no normalization is stored.
    pub fn evaluate_normalized(&self, x: &[f64]) -> Result<Vec<f64>> {
        let Some(norm) = &self.normalization else {
            return self.evaluate(x);
        };
        check_dim("network input", self.input_dim, x.len())?;
        let scaled: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let clipped = v.max(norm.input_min[i]).min(norm.input_max[i]);
                (clipped - norm.input_mean[i]) / norm.input_range[i]
            })
            .collect();
        let y = self.evaluate(&scaled)?;
        Ok(y.into_iter()
            .map(|v| v * norm.output_range + norm.output_mean)
            .collect())
    }

    /// `∇ₓ (cᵀ f(x))` by reverse accumulation. At `ẑ = 0` the inactive
    /// branch (derivative 0) is taken.
    pub fn gradient(&self, x: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        check_dim("objective", self.output_dim, c.len())?;
        let trace = self.forward(x)?;
        let mut adj = c.to_vec();
        for (layer, zhat) in self.layers.iter().zip(&trace.pre).rev() {
            if layer.activation == Activation::Relu {
                for (a, &v) in adj.iter_mut().zip(zhat) {
                    if v <= 0.0 {
                        *a = 0.0;
                    }
                }
            }
            adj = layer.weights.tr_mul_vec(&adj);
        }
        Ok(adj)
    }
}

/// A seeded network with ReLU hidden layers and an identity output layer.
/// `dims` lists the widths from input to output. Weights are uniform in
/// `±1/sqrt(fan_in)`, biases uniform in `±0.5`.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> Result<Network> {
    if dims.len() < 2 {
        return Err(Error::InvalidNetwork(
            "need at least input and output widths".into(),
        ));
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (k, pair) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let scale = 1.0 / (fan_in as f64).sqrt();
        let mut w = Matrix::zeros(fan_out, fan_in);
        for i in 0..fan_out {
            for j in 0..fan_in {
                w[(i, j)] = rng.gen_range(-scale..=scale);
            }
        }
        let b = (0..fan_out).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let activation = if k + 2 == dims.len() {
            Activation::Identity
        } else {
            Activation::Relu
        };
        layers.push(Layer::new(w, b, activation)?);
    }
    Network::new(layers)
}
