use std::time::Instant;

use crate::bounds::{fixed_by_bounds, propagate_interval};
use crate::error::{Error, Result};
use crate::lp::{build_relaxed_lp, solve_lp, LpResult};
use crate::model::Network;
use crate::problem::OptimizationProblem;
use crate::search::{PartialActivationState, Phase, SearchResult, SearchStats, SearchStatus};

/// Largest number of unfixed ReLUs [`brute_force_optimize`] will enumerate.
pub const ENUMERATION_LIMIT: usize = 20;

/// Solves the exact LP of every complete activation state compatible with
/// interval bounds and keeps the best.
pub fn brute_force_optimize(net: &Network, problem: &OptimizationProblem) -> Result<SearchResult> {
    problem.check_dims(net)?;
    let start = Instant::now();
    let bounds = propagate_interval(net, &problem.input)?;
    let root = PartialActivationState::from_fixed(net, &fixed_by_bounds(&bounds));
    let free = root.undetermined();
    if free.len() > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            unfixed: free.len(),
            limit: ENUMERATION_LIMIT,
        });
    }

    let mut stats = SearchStats::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u64..(1u64 << free.len()) {
        let mut state = root.clone();
        for (bit, &id) in free.iter().enumerate() {
            let phase = if mask >> bit & 1 == 1 {
                Phase::Active
            } else {
                Phase::Inactive
            };
            state = state.with_phase(id, phase);
        }
        let (lp, map) = build_relaxed_lp(net, &state, &bounds, problem)?;
        stats.nodes += 1;
        stats.lps += 1;
        if let LpResult::Optimal { assignment, .. } = solve_lp(&lp)? {
            let x = map.input_values(&assignment);
            let value = problem.objective_at(net, &x)?;
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                best = Some((value, x));
            }
        }
    }
    stats.wall = start.elapsed();
    Ok(match best {
        Some((value, x)) => SearchResult {
            status: SearchStatus::Optimal,
            value: Some(value),
            argopt: Some(x),
            stats,
            bracket: None,
        },
        None => SearchResult::infeasible(stats),
    })
}
