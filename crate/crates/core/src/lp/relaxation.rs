//! The relaxed LP for a partial activation state.
//!
//! Columns are the inputs `x`, then `ẑ` and `z` of every layer, then the
//! epigraph variable `t` when the problem measures a distance. Undetermined
//! ReLUs are relaxed to `z ≥ ẑ ∧ z ≥ 0`; fixed ones become linear, together
//! with the sign row on `ẑ` that makes fully-fixed states exact.

use super::{Constraint, LinearProgram, Relation};
use crate::bounds::BoundsMap;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{Direction, Hyperrectangle};
use crate::model::{Activation, Network, NodeId};
use crate::problem::{LinearForm, OptimizationProblem};
use crate::search::{PartialActivationState, Phase};

/// LP column of every network quantity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableIndexMap {
    pub input: Vec<usize>,
    /// `ẑ` columns per layer (all layers, not only ReLU ones).
    pub pre: Vec<Vec<usize>>,
    /// `z` columns per layer.
    pub post: Vec<Vec<usize>>,
    pub epigraph: Option<usize>,
}

impl VariableIndexMap {
    pub fn output(&self) -> &[usize] {
        self.post.last().map_or(&self.input, Vec::as_slice)
    }

    pub fn input_values(&self, assignment: &[f64]) -> Vec<f64> {
        self.input.iter().map(|&j| assignment[j]).collect()
    }

    pub fn output_values(&self, assignment: &[f64]) -> Vec<f64> {
        self.output().iter().map(|&j| assignment[j]).collect()
    }

    pub fn pre_var(&self, net: &Network, id: NodeId) -> usize {
        self.pre[net.relu_layers()[id.layer]][id.node]
    }

    pub fn post_var(&self, net: &Network, id: NodeId) -> usize {
        self.post[net.relu_layers()[id.layer]][id.node]
    }

    /// ReLU-node values of an LP assignment.
    pub fn node_values(&self, net: &Network, assignment: &[f64]) -> NodeValues {
        let pick = |cols: &Vec<Vec<usize>>| {
            net.relu_layers()
                .iter()
                .filter(|&&k| k < cols.len())
                .map(|&k| cols[k].iter().map(|&j| assignment[j]).collect())
                .collect()
        };
        NodeValues {
            pre: pick(&self.pre),
            post: pick(&self.post),
        }
    }

    /// Column values of a forward pass; `t` (if present) is set to `t`.
    /// Columns beyond the network and epigraph are left at zero.
    pub fn assignment_of(
        &self,
        trace: &crate::model::ForwardTrace,
        num_vars: usize,
        t: f64,
    ) -> Vec<f64> {
        let mut a = vec![0.0; num_vars];
        for (&j, &v) in self.input.iter().zip(&trace.input) {
            a[j] = v;
        }
        for (cols, vals) in self.pre.iter().zip(&trace.pre) {
            for (&j, &v) in cols.iter().zip(vals) {
                a[j] = v;
            }
        }
        for (cols, vals) in self.post.iter().zip(&trace.post) {
            for (&j, &v) in cols.iter().zip(vals) {
                a[j] = v;
            }
        }
        if let Some(j) = self.epigraph {
            a[j] = t;
        }
        a
    }

    fn form_terms(&self, form: &LinearForm) -> Result<Vec<(usize, f64)>> {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        terms.extend(self.input.iter().zip(&form.x).map(|(&j, &c)| (j, c)));
        terms.extend(self.output().iter().zip(&form.y).map(|(&j, &c)| (j, c)));
        if form.t != 0.0 {
            let t = self.epigraph.ok_or_else(|| {
                Error::Unsupported("form uses t but the problem has no epigraph".into())
            })?;
            terms.push((t, form.t));
        }
        terms.retain(|&(_, c)| c != 0.0);
        Ok(terms)
    }
}

/// `ẑ` and `z` of every ReLU node, indexed by ReLU layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeValues {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl NodeValues {
    pub fn from_trace(net: &Network, trace: &crate::model::ForwardTrace) -> Self {
        Self {
            pre: net
                .relu_layers()
                .iter()
                .map(|&k| trace.pre[k].clone())
                .collect(),
            post: net
                .relu_layers()
                .iter()
                .map(|&k| trace.post[k].clone())
                .collect(),
        }
    }
}

/// Encodes the first `depth` layers of `net` under `state`.
pub(crate) fn encode_network(
    net: &Network,
    state: &PartialActivationState,
    bounds: &BoundsMap,
    input: &Hyperrectangle,
    depth: usize,
) -> Result<(LinearProgram, VariableIndexMap)> {
    state.check_shape(net)?;
    check_dim("input box", net.input_dim(), input.dim())?;
    check_dim("bounds layers", net.layers().len(), bounds.num_layers())?;

    let mut lp = LinearProgram::new(Direction::Maximize);
    let input_cols: Vec<usize> = (0..net.input_dim())
        .map(|i| lp.add_variable(format!("x{i}"), input.lower()[i], input.upper()[i]))
        .collect();
    let mut map = VariableIndexMap {
        input: input_cols,
        pre: Vec::with_capacity(depth),
        post: Vec::with_capacity(depth),
        epigraph: None,
    };

    let mut relu_index = 0;
    for (k, layer) in net.layers().iter().enumerate().take(depth) {
        let width = layer.output_dim();
        let is_relu = layer.activation == Activation::Relu;
        let mut pre = Vec::with_capacity(width);
        let mut post = Vec::with_capacity(width);
        for j in 0..width {
            let (pre_bounds, post_bounds) = if is_relu {
                let id = NodeId::new(relu_index, j);
                let (p, z) = (bounds.pre(id), bounds.post(id));
                ((p.lo, p.hi), (z.lo, z.hi))
            } else {
                (
                    (f64::NEG_INFINITY, f64::INFINITY),
                    (f64::NEG_INFINITY, f64::INFINITY),
                )
            };
            pre.push(lp.add_variable(format!("zhat_{k}_{j}"), pre_bounds.0, pre_bounds.1));
            post.push(lp.add_variable(format!("z_{k}_{j}"), post_bounds.0, post_bounds.1));
        }

        let incoming = if k == 0 { &map.input } else { &map.post[k - 1] };
        for j in 0..width {
            let mut coefficients = vec![(pre[j], 1.0)];
            coefficients.extend(
                layer
                    .weights
                    .row(j)
                    .iter()
                    .zip(incoming)
                    .filter(|(&w, _)| w != 0.0)
                    .map(|(&w, &col)| (col, -w)),
            );
            lp.add_constraint(Constraint::new(coefficients, Relation::Eq, layer.biases[j]))?;
        }

        for j in 0..width {
            let (zh, z) = (pre[j], post[j]);
            let phase = if is_relu {
                state.phase(NodeId::new(relu_index, j))
            } else {
                Phase::Active
            };
            match (is_relu, phase) {
                (false, _) => {
                    lp.add_constraint(Constraint::new(
                        vec![(z, 1.0), (zh, -1.0)],
                        Relation::Eq,
                        0.0,
                    ))?;
                }
                (true, Phase::Active) => {
                    lp.add_constraint(Constraint::new(
                        vec![(z, 1.0), (zh, -1.0)],
                        Relation::Eq,
                        0.0,
                    ))?;
                    lp.add_constraint(Constraint::new(vec![(zh, 1.0)], Relation::Ge, 0.0))?;
                }
                (true, Phase::Inactive) => {
                    lp.add_constraint(Constraint::new(vec![(z, 1.0)], Relation::Eq, 0.0))?;
                    lp.add_constraint(Constraint::new(vec![(zh, 1.0)], Relation::Le, 0.0))?;
                }
                (true, Phase::Undetermined) => {
                    lp.add_constraint(Constraint::new(
                        vec![(z, 1.0), (zh, -1.0)],
                        Relation::Ge,
                        0.0,
                    ))?;
                    lp.add_constraint(Constraint::new(vec![(z, 1.0)], Relation::Ge, 0.0))?;
                }
            }
        }
        if is_relu {
            relu_index += 1;
        }
        map.pre.push(pre);
        map.post.push(post);
    }
    Ok((lp, map))
}

/// Relaxed LP of `problem` restricted to the activation region `state`:
/// network rows, the problem's input box, its epigraph rows, output rows and
/// objective (always maximized).
pub fn build_relaxed_lp(
    net: &Network,
    state: &PartialActivationState,
    bounds: &BoundsMap,
    problem: &OptimizationProblem,
) -> Result<(LinearProgram, VariableIndexMap)> {
    problem.check_dims(net)?;
    let (mut lp, mut map) = encode_network(net, state, bounds, &problem.input, net.layers().len())?;

    if let Some(epi) = &problem.epigraph {
        let t = lp.add_variable("t", 0.0, f64::INFINITY);
        map.epigraph = Some(t);
        for row in epi.rows() {
            let n = net.input_dim();
            let mut coefficients: Vec<(usize, f64)> = map
                .input
                .iter()
                .zip(&row.coefficients[..n])
                .filter(|(_, &c)| c != 0.0)
                .map(|(&j, &c)| (j, c))
                .collect();
            coefficients.push((t, row.coefficients[n]));
            lp.add_constraint(Constraint::new(coefficients, Relation::Le, row.rhs))?;
        }
    }

    for row in &problem.rows {
        let terms = map.form_terms(&row.form)?;
        lp.add_constraint(Constraint::new(terms, row.relation, row.rhs))?;
    }
    for (j, c) in map.form_terms(&problem.objective)? {
        lp.set_objective(j, c);
    }
    Ok((lp, map))
}

/// Every ReLU node with `|z − max(0, ẑ)| > tol`, largest violation first,
/// ties by ascending node.
pub fn check_relu_consistency(net: &Network, values: &NodeValues, tol: f64) -> Vec<(NodeId, f64)> {
    let mut out: Vec<(NodeId, f64)> = net
        .relu_nodes()
        .filter_map(|id| {
            let zh = values.pre[id.layer][id.node];
            let z = values.post[id.layer][id.node];
            let v = (z - zh.max(0.0)).abs();
            (v > tol).then_some((id, v))
        })
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}
