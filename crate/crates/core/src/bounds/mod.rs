//! Per-node bounds: interval propagation and LP-based progressive
//! tightening.

mod tighten;

pub use tighten::{tighten_lp, TIGHTENING_MARGIN};

use std::collections::BTreeSet;

use crate::error::{check_dim, Result};
use crate::geometry::Hyperrectangle;
use crate::model::{Activation, Network, NodeId};

/// Slack allowed between post-activation bounds and `max(0, pre)` bounds.
pub const POST_BOUND_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        self.lo - tol <= v && v <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_subset_of(&self, other: &Interval, tol: f64) -> bool {
        self.lo >= other.lo - tol && self.hi <= other.hi + tol
    }

    fn relu(self) -> Self {
        Self::new(self.lo.max(0.0), self.hi.max(0.0))
    }
}

/// Pre- and post-activation intervals for every node of every layer, plus
/// the input box. ReLU nodes are addressed through [`NodeId`]; identity
/// layers (including the output) are reachable by layer index.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsMap {
    input: Hyperrectangle,
    pre: Vec<Vec<Interval>>,
    post: Vec<Vec<Interval>>,
    relu_layers: Vec<usize>,
}

impl BoundsMap {
    pub fn input(&self) -> &Hyperrectangle {
        &self.input
    }

    pub fn layer_pre(&self, layer: usize) -> &[Interval] {
        &self.pre[layer]
    }

    pub fn layer_post(&self, layer: usize) -> &[Interval] {
        &self.post[layer]
    }

    pub fn num_layers(&self) -> usize {
        self.pre.len()
    }

    pub fn output(&self) -> &[Interval] {
        self.post.last().map_or(&[], Vec::as_slice)
    }

    pub fn relu_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.relu_layers
            .iter()
            .enumerate()
            .flat_map(move |(r, &k)| (0..self.pre[k].len()).map(move |j| NodeId::new(r, j)))
    }

    pub fn pre(&self, id: NodeId) -> Interval {
        self.pre[self.relu_layers[id.layer]][id.node]
    }

    pub fn post(&self, id: NodeId) -> Interval {
        self.post[self.relu_layers[id.layer]][id.node]
    }

    pub(crate) fn set_pre(&mut self, id: NodeId, iv: Interval) {
        let k = self.relu_layers[id.layer];
        self.pre[k][id.node] = iv;
    }

    pub(crate) fn set_post(&mut self, id: NodeId, iv: Interval) {
        let k = self.relu_layers[id.layer];
        self.post[k][id.node] = iv;
    }

    pub(crate) fn set_layer(&mut self, layer: usize, pre: Vec<Interval>, post: Vec<Interval>) {
        self.pre[layer] = pre;
        self.post[layer] = post;
    }

    /// True when every node's intervals here lie inside `other`'s.
    pub fn is_subset_of(&self, other: &BoundsMap, tol: f64) -> bool {
        let layers = |a: &Vec<Vec<Interval>>, b: &Vec<Vec<Interval>>| {
            a.iter()
                .flatten()
                .zip(b.iter().flatten())
                .all(|(x, y)| x.is_subset_of(y, tol))
        };
        layers(&self.pre, &other.pre) && layers(&self.post, &other.post)
    }

    /// Checks the ordering and ReLU post-activation invariants.
    pub fn is_valid(&self, net: &Network) -> bool {
        let ordered = self
            .pre
            .iter()
            .chain(&self.post)
            .flatten()
            .all(|iv| iv.lo <= iv.hi);
        let relu_ok = net.relu_nodes().all(|id| {
            let (p, z) = (self.pre(id), self.post(id));
            z.lo >= 0.0
                && z.hi >= 0.0
                && z.lo >= p.lo.max(0.0) - POST_BOUND_EPS
                && z.hi <= p.hi.max(0.0) + POST_BOUND_EPS
        });
        ordered && relu_ok
    }
}

/// Interval image of `W z + b` for `z` in `incoming`, splitting each weight
/// into its positive and negative part.
pub(crate) fn affine_interval(
    weights: &crate::model::Matrix,
    biases: &[f64],
    incoming: &[Interval],
) -> Vec<Interval> {
    weights
        .row_iter()
        .zip(biases)
        .map(|(row, &b)| {
            let (mut lo, mut hi) = (b, b);
            for (&w, iv) in row.iter().zip(incoming) {
                if w >= 0.0 {
                    lo += w * iv.lo;
                    hi += w * iv.hi;
                } else {
                    lo += w * iv.hi;
                    hi += w * iv.lo;
                }
            }
            Interval::new(lo, hi)
        })
        .collect()
}

pub(crate) fn activate_interval(activation: Activation, pre: &[Interval]) -> Vec<Interval> {
    match activation {
        Activation::Relu => pre.iter().map(|iv| iv.relu()).collect(),
        Activation::Identity => pre.to_vec(),
    }
}

pub fn propagate_interval(net: &Network, input: &Hyperrectangle) -> Result<BoundsMap> {
    check_dim("input box", net.input_dim(), input.dim())?;
    let mut incoming: Vec<Interval> = input
        .lower()
        .iter()
        .zip(input.upper())
        .map(|(&l, &u)| Interval::new(l, u))
        .collect();
    let mut pre = Vec::with_capacity(net.layers().len());
    let mut post = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let p = affine_interval(&layer.weights, &layer.biases, &incoming);
        let z = activate_interval(layer.activation, &p);
        incoming = z.clone();
        pre.push(p);
        post.push(z);
    }
    Ok(BoundsMap {
        input: input.clone(),
        pre,
        post,
        relu_layers: net.relu_layers().to_vec(),
    })
}

/// ReLU nodes whose phase is decided by their pre-activation bounds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixedByBounds {
    pub active: BTreeSet<NodeId>,
    pub inactive: BTreeSet<NodeId>,
}

impl FixedByBounds {
    pub fn count(&self) -> usize {
        self.active.len() + self.inactive.len()
    }
}

/// Active when `L̂ ≥ 0`, inactive when `Û ≤ 0`; a node with `L̂ = Û = 0`
/// counts as inactive.
pub fn fixed_by_bounds(bounds: &BoundsMap) -> FixedByBounds {
    let mut fixed = FixedByBounds::default();
    for id in bounds.relu_nodes() {
        let p = bounds.pre(id);
        if p.hi <= 0.0 {
            fixed.inactive.insert(id);
        } else if p.lo >= 0.0 {
            fixed.active.insert(id);
        }
    }
    fixed
}
