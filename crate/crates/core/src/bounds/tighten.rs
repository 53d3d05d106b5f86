use std::time::{Duration, Instant};

use super::{activate_interval, affine_interval, fixed_by_bounds, BoundsMap, Interval};
use crate::error::{Error, Result};
use crate::geometry::{Direction, Hyperrectangle};
use crate::lp::{encode_network, solve_lp_with, LinearProgram, LpResult, SolverOptions};
use crate::model::{Activation, Network, NodeId};
use crate::search::PartialActivationState;

/// Relative outward padding applied to every LP-derived bound, absorbing
/// the solver's feasibility tolerance.
pub const TIGHTENING_MARGIN: f64 = 1e-7;

/// A bound is replaced only when it improves by at least this much.
const MIN_IMPROVEMENT: f64 = 1e-9;

/// Progressive LP tightening of `seed`.
///
/// ReLU nodes are visited in topological order. For each node the relaxed
/// LP of the layers up to and including it is solved four times (maximize
/// and minimize `ẑ`, then `z`), each with its own `per_query_timeout`. A
/// bound changes only when its LP finishes in time and improves it; the next
/// node already sees the new bounds, and once a layer changed the following
/// layer's intervals are re-propagated and intersected with the old ones.
pub fn tighten_lp(
    net: &Network,
    input: &Hyperrectangle,
    seed: &BoundsMap,
    per_query_timeout: Duration,
) -> Result<BoundsMap> {
    let mut bounds = seed.clone();
    let mut relu_index = 0;
    for (k, layer) in net.layers().iter().enumerate() {
        let mut changed = false;
        if layer.activation == Activation::Relu {
            for j in 0..layer.output_dim() {
                let id = NodeId::new(relu_index, j);
                changed |= tighten_node(net, input, &mut bounds, k, id, per_query_timeout)?;
            }
            relu_index += 1;
        }
        if changed && k + 1 < net.layers().len() {
            let next = &net.layers()[k + 1];
            let pre = affine_interval(&next.weights, &next.biases, bounds.layer_post(k));
            let pre: Vec<Interval> = pre
                .iter()
                .zip(bounds.layer_pre(k + 1))
                .map(|(a, b)| intersect(*a, *b))
                .collect();
            let post: Vec<Interval> = activate_interval(next.activation, &pre)
                .iter()
                .zip(bounds.layer_post(k + 1))
                .map(|(a, b)| intersect(*a, *b))
                .collect();
            bounds.set_layer(k + 1, pre, post);
        }
    }
    Ok(bounds)
}

fn intersect(a: Interval, b: Interval) -> Interval {
    let lo = a.lo.max(b.lo);
    let hi = a.hi.min(b.hi);
    // Both are sound, so an empty intersection is numerical noise.
    if lo <= hi {
        Interval::new(lo, hi)
    } else {
        b
    }
}

fn tighten_node(
    net: &Network,
    input: &Hyperrectangle,
    bounds: &mut BoundsMap,
    layer: usize,
    id: NodeId,
    timeout: Duration,
) -> Result<bool> {
    let state = PartialActivationState::from_fixed(net, &fixed_by_bounds(bounds));
    let (mut lp, map) = encode_network(net, &state, bounds, input, layer + 1)?;
    let pre_col = map.pre[layer][id.node];
    let post_col = map.post[layer][id.node];

    let mut pre = bounds.pre(id);
    let mut post = bounds.post(id);
    let mut changed = false;

    if let Some(v) = optimize_column(&mut lp, pre_col, Direction::Maximize, timeout, id) {
        changed |= lower_hi(&mut pre, v);
    }
    if let Some(v) = optimize_column(&mut lp, pre_col, Direction::Minimize, timeout, id) {
        changed |= raise_lo(&mut pre, v);
    }
    if let Some(v) = optimize_column(&mut lp, post_col, Direction::Maximize, timeout, id) {
        changed |= lower_hi(&mut post, v);
    }
    if let Some(v) = optimize_column(&mut lp, post_col, Direction::Minimize, timeout, id) {
        changed |= raise_lo(&mut post, v);
    }
    if changed {
        let lo = post.lo.max(pre.lo.max(0.0)).max(0.0);
        let hi = post.hi.min(pre.hi.max(0.0));
        post = if lo <= hi {
            Interval::new(lo, hi)
        } else {
            post
        };
        bounds.set_pre(id, pre);
        bounds.set_post(id, post);
    }
    Ok(changed)
}

fn margin(v: f64) -> f64 {
    TIGHTENING_MARGIN * (1.0 + v.abs())
}

fn lower_hi(iv: &mut Interval, lp_max: f64) -> bool {
    let candidate = lp_max + margin(lp_max);
    if candidate <= iv.hi - MIN_IMPROVEMENT && candidate >= iv.lo {
        iv.hi = candidate;
        true
    } else {
        false
    }
}

fn raise_lo(iv: &mut Interval, lp_min: f64) -> bool {
    let candidate = lp_min - margin(lp_min);
    if candidate >= iv.lo + MIN_IMPROVEMENT && candidate <= iv.hi {
        iv.lo = candidate;
        true
    } else {
        false
    }
}

fn optimize_column(
    lp: &mut LinearProgram,
    col: usize,
    direction: Direction,
    timeout: Duration,
    id: NodeId,
) -> Option<f64> {
    for j in 0..lp.num_vars() {
        lp.set_objective(j, 0.0);
    }
    lp.set_objective(col, 1.0);
    lp.set_direction(direction);
    let options = SolverOptions {
        deadline: Some(Instant::now() + timeout),
        max_iterations: None,
    };
    match solve_lp_with(lp, &options) {
        Ok(LpResult::Optimal { objective, .. }) => Some(objective),
        Ok(other) => {
            log::debug!("tightening {id}: LP ended {:?}, bound kept", other.status());
            None
        }
        Err(Error::DeadlineExceeded) => {
            log::debug!("tightening {id}: timed out, bound kept");
            None
        }
        Err(e) => {
            log::warn!("tightening {id}: {e}, bound kept");
            None
        }
    }
}
