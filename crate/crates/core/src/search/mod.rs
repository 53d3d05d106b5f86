//! Branch and bound over partial activation states.
//!
//! Each frontier entry is a partial activation state. Its relaxed LP yields
//! an upper bound on the objective over the region; the region is pruned
//! when that bound cannot beat the incumbent, accepted when the LP optimum is
//! already network-consistent, and otherwise split on an undetermined ReLU.
//! With every ReLU fixed the relaxation is exact, so every leaf resolves and
//! the search terminates with a certified optimum.

mod frontier;
mod state;

pub use state::{PartialActivationState, Phase};

use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::baselines::{pgd, PgdConfig};
use crate::bounds::{fixed_by_bounds, propagate_interval, tighten_lp, BoundsMap};
use crate::error::{Error, Result};
use crate::lp::{
    build_relaxed_lp, check_relu_consistency, solve_lp_with, LpResult, NodeValues, SolverOptions,
};
use crate::model::{Network, NodeId};
use crate::problem::OptimizationProblem;
use frontier::Frontier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitStrategy {
    EarliestUnfixed,
    LargestViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeOrder {
    /// Highest parent LP bound first.
    BestFirst,
    DepthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WarmStart {
    None,
    Pgd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preprocess {
    Interval,
    /// Interval bounds followed by progressive LP tightening.
    LpTightening {
        per_query_timeout: Duration,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub split: SplitStrategy,
    pub order: NodeOrder,
    pub timeout: Duration,
    pub warm_start: WarmStart,
    pub preprocess: Preprocess,
    pub consistency_tol: f64,
    /// A region is pruned when `lp_bound ≤ incumbent + prune_margin`.
    pub prune_margin: f64,
    /// Return on the first network-consistent region (feasibility mode).
    pub stop_at_first_feasible: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            split: SplitStrategy::LargestViolation,
            order: NodeOrder::BestFirst,
            timeout: Duration::from_secs(120),
            warm_start: WarmStart::None,
            preprocess: Preprocess::LpTightening {
                per_query_timeout: Duration::from_secs(1),
            },
            consistency_tol: 1e-6,
            prune_margin: 0.0,
            stop_at_first_feasible: false,
        }
    }
}

impl SearchConfig {
    pub fn feasibility(mut self) -> Self {
        self.stop_at_first_feasible = true;
        self
    }
}

/// Outcome of solving the relaxation of one region.
#[derive(Debug, Clone, PartialEq)]
pub enum RelaxedRegion {
    Infeasible,
    /// The relaxation is unbounded; its bound counts as `+∞`.
    Unbounded,
    Solved {
        bound: f64,
        /// Input part of the LP optimum.
        input: Vec<f64>,
        values: NodeValues,
        /// Objective of `input` under the exact network.
        exact_value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionOutcome {
    /// The region cannot beat the incumbent (or is empty: `lp_bound = −∞`).
    WorseThanOpt { lp_bound: f64 },
    /// The LP optimum violates some ReLU; the region must be split.
    Unknown {
        lp_bound: f64,
        lp_assignment: Option<NodeValues>,
    },
    /// The LP optimum is network-consistent and optimal for the region.
    Optimal {
        value: f64,
        assignment: Vec<f64>,
        lp_bound: f64,
    },
}

impl RegionOutcome {
    pub fn lp_bound(&self) -> f64 {
        match self {
            RegionOutcome::WorseThanOpt { lp_bound }
            | RegionOutcome::Unknown { lp_bound, .. }
            | RegionOutcome::Optimal { lp_bound, .. } => *lp_bound,
        }
    }
}

/// Turns a solved relaxation into a region outcome. A complete state is
/// never `Unknown`: its relaxation is exact.
pub fn classify_region(
    net: &Network,
    relaxed: RelaxedRegion,
    complete: bool,
    incumbent: f64,
    config: &SearchConfig,
) -> Result<RegionOutcome> {
    match relaxed {
        RelaxedRegion::Infeasible => Ok(RegionOutcome::WorseThanOpt {
            lp_bound: f64::NEG_INFINITY,
        }),
        RelaxedRegion::Unbounded if complete => Err(Error::NumericalFailure(
            "relaxation of a fully fixed region is unbounded".into(),
        )),
        RelaxedRegion::Unbounded => Ok(RegionOutcome::Unknown {
            lp_bound: f64::INFINITY,
            lp_assignment: None,
        }),
        RelaxedRegion::Solved {
            bound,
            input,
            values,
            exact_value,
        } => {
            if bound <= incumbent + config.prune_margin {
                return Ok(RegionOutcome::WorseThanOpt { lp_bound: bound });
            }
            let violations = check_relu_consistency(net, &values, config.consistency_tol);
            if violations.is_empty() || complete {
                if !violations.is_empty() {
                    log::debug!(
                        "leaf relaxation off by {:e}; accepting as exact",
                        violations[0].1
                    );
                }
                Ok(RegionOutcome::Optimal {
                    value: exact_value,
                    assignment: input,
                    lp_bound: bound,
                })
            } else {
                Ok(RegionOutcome::Unknown {
                    lp_bound: bound,
                    lp_assignment: Some(values),
                })
            }
        }
    }
}

/// Source of relaxed regions for [`branch_and_bound`].
pub trait RegionRelaxation {
    fn relax(&mut self, state: &PartialActivationState) -> Result<RelaxedRegion>;
}

/// Relaxed LPs of a concrete network and problem.
pub struct NetworkRelaxation<'a> {
    pub net: &'a Network,
    pub problem: &'a OptimizationProblem,
    pub bounds: &'a BoundsMap,
    pub deadline: Option<Instant>,
}

impl RegionRelaxation for NetworkRelaxation<'_> {
    fn relax(&mut self, state: &PartialActivationState) -> Result<RelaxedRegion> {
        relax_region(self.net, self.problem, state, self.bounds, self.deadline)
    }
}

fn relax_region(
    net: &Network,
    problem: &OptimizationProblem,
    state: &PartialActivationState,
    bounds: &BoundsMap,
    deadline: Option<Instant>,
) -> Result<RelaxedRegion> {
    let (lp, map) = build_relaxed_lp(net, state, bounds, problem)?;
    let options = SolverOptions {
        deadline,
        max_iterations: None,
    };
    match solve_lp_with(&lp, &options)? {
        LpResult::Infeasible => Ok(RelaxedRegion::Infeasible),
        LpResult::Unbounded => Ok(RelaxedRegion::Unbounded),
        LpResult::Optimal {
            objective,
            assignment,
        } => {
            let input = map.input_values(&assignment);
            let exact_value = problem.objective_at(net, &input)?;
            Ok(RelaxedRegion::Solved {
                bound: objective,
                values: map.node_values(net, &assignment),
                input,
                exact_value,
            })
        }
    }
}

/// Solves the relaxed LP of `state` and classifies the region against the
/// incumbent (`−∞` when none is known).
pub fn optimum_for_region(
    net: &Network,
    problem: &OptimizationProblem,
    state: &PartialActivationState,
    bounds: &BoundsMap,
    incumbent: f64,
    config: &SearchConfig,
) -> Result<RegionOutcome> {
    let relaxed = relax_region(net, problem, state, bounds, None)?;
    classify_region(net, relaxed, state.is_complete(), incumbent, config)
}

/// Fixes one undetermined node: active in the first child, inactive in the
/// second.
pub fn split(
    state: &PartialActivationState,
    strategy: SplitStrategy,
    lp_assignment: Option<&NodeValues>,
) -> Result<(PartialActivationState, PartialActivationState)> {
    let undetermined = state.undetermined();
    let earliest = *undetermined.first().ok_or(Error::NoUndetermined)?;
    let node = match (strategy, lp_assignment) {
        (SplitStrategy::LargestViolation, Some(values)) => {
            let mut best: Option<(NodeId, f64)> = None;
            for &id in &undetermined {
                let zh = values.pre[id.layer][id.node];
                let z = values.post[id.layer][id.node];
                let v = (z - zh.max(0.0)).abs();
                // strict comparison keeps the smallest node among ties
                if v > 0.0 && best.map_or(true, |(_, b)| v > b) {
                    best = Some((id, v));
                }
            }
            best.map_or(earliest, |(id, _)| id)
        }
        _ => earliest,
    };
    Ok((
        state.with_phase(node, Phase::Active),
        state.with_phase(node, Phase::Inactive),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SearchStatus {
    Optimal,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub nodes: usize,
    pub lps: usize,
    pub wall: Duration,
    pub peak_frontier: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub status: SearchStatus,
    /// Optimal value, or the best incumbent (a lower bound) on timeout.
    pub value: Option<f64>,
    pub argopt: Option<Vec<f64>>,
    pub stats: SearchStats,
    /// Final `[lower, upper]` bracket of bracketing solvers.
    pub bracket: Option<(f64, f64)>,
}

impl SearchResult {
    pub fn infeasible(stats: SearchStats) -> Self {
        Self {
            status: SearchStatus::Infeasible,
            value: None,
            argopt: None,
            stats,
            bracket: None,
        }
    }
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    seq: usize,
    depth: usize,
    state: &'a str,
    parent_bound: Option<f64>,
    lp_bound: Option<f64>,
    status: &'a str,
    incumbent: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Known feasible point used as the starting incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub value: f64,
    pub argopt: Vec<f64>,
}

/// Generic branch and bound driven by `relaxation`, starting from `root`.
pub fn branch_and_bound<R: RegionRelaxation>(
    net: &Network,
    root: PartialActivationState,
    relaxation: &mut R,
    config: &SearchConfig,
    initial: Option<Incumbent>,
    mut trace: Option<&mut dyn Write>,
) -> Result<SearchResult> {
    let start = Instant::now();
    let mut stats = SearchStats::default();
    let mut best = initial;
    let mut frontier = Frontier::new(config.order);
    frontier.push(root, f64::INFINITY);
    stats.peak_frontier = 1;
    let mut seq = 0;

    while let Some((state, parent_bound)) = frontier.pop() {
        if start.elapsed() >= config.timeout {
            stats.wall = start.elapsed();
            return Ok(timeout_result(best, stats));
        }
        let incumbent = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value);
        let fingerprint = trace.is_some().then(|| state.fingerprint());
        let mut emit = |status: &str, lp_bound: Option<f64>, incumbent: f64| -> Result<()> {
            if let (Some(out), Some(fp)) = (trace.as_deref_mut(), fingerprint.as_deref()) {
                let record = TraceRecord {
                    seq,
                    depth: state.depth_fixed(),
                    state: fp,
                    parent_bound: finite(parent_bound),
                    lp_bound,
                    status,
                    incumbent: finite(incumbent),
                };
                serde_json::to_writer(&mut *out, &record).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
            Ok(())
        };

        if parent_bound <= incumbent + config.prune_margin {
            emit("Pruned", None, incumbent)?;
            seq += 1;
            continue;
        }

        stats.nodes += 1;
        stats.lps += 1;
        let relaxed = match relaxation.relax(&state) {
            Ok(r) => r,
            Err(Error::DeadlineExceeded) => {
                stats.wall = start.elapsed();
                return Ok(timeout_result(best, stats));
            }
            Err(Error::NumericalFailure(msg)) => {
                return Err(Error::NumericalFailure(format!(
                    "region {}: {msg}",
                    state.fingerprint()
                )))
            }
            Err(e) => return Err(e),
        };
        let outcome = classify_region(net, relaxed, state.is_complete(), incumbent, config)?;
        let lp_bound = outcome.lp_bound();

        match outcome {
            RegionOutcome::WorseThanOpt { .. } => {
                emit("WorseThanOpt", finite(lp_bound), incumbent)?;
            }
            RegionOutcome::Optimal {
                value, assignment, ..
            } => {
                if value > incumbent {
                    best = Some(Incumbent {
                        value,
                        argopt: assignment,
                    });
                }
                let now = best.as_ref().map_or(incumbent, |b| b.value);
                emit("Optimal", finite(lp_bound), now)?;
                if config.stop_at_first_feasible {
                    break;
                }
            }
            RegionOutcome::Unknown { lp_assignment, .. } => {
                emit("Unknown", finite(lp_bound), incumbent)?;
                let (active, inactive) = split(&state, config.split, lp_assignment.as_ref())?;
                frontier.push_children(active, inactive, lp_bound);
                stats.peak_frontier = stats.peak_frontier.max(frontier.len());
            }
        }
        seq += 1;
    }

    stats.wall = start.elapsed();
    Ok(match best {
        Some(b) => SearchResult {
            status: SearchStatus::Optimal,
            value: Some(b.value),
            argopt: Some(b.argopt),
            stats,
            bracket: None,
        },
        None => SearchResult::infeasible(stats),
    })
}

fn timeout_result(best: Option<Incumbent>, stats: SearchStats) -> SearchResult {
    let (value, argopt) = match best {
        Some(b) => (Some(b.value), Some(b.argopt)),
        None => (None, None),
    };
    SearchResult {
        status: SearchStatus::Timeout,
        value,
        argopt,
        stats,
        bracket: None,
    }
}

/// Bounds for `problem.input` according to `preprocess`.
pub fn compute_bounds(
    net: &Network,
    input: &crate::geometry::Hyperrectangle,
    preprocess: Preprocess,
) -> Result<BoundsMap> {
    let intervals = propagate_interval(net, input)?;
    match preprocess {
        Preprocess::Interval => Ok(intervals),
        Preprocess::LpTightening { per_query_timeout } => {
            tighten_lp(net, input, &intervals, per_query_timeout)
        }
    }
}

/// Global maximum of `problem` over its input box and output rows.
pub fn optimize(
    net: &Network,
    problem: &OptimizationProblem,
    config: &SearchConfig,
) -> Result<SearchResult> {
    optimize_traced(net, problem, config, None)
}

pub fn optimize_traced(
    net: &Network,
    problem: &OptimizationProblem,
    config: &SearchConfig,
    trace: Option<&mut dyn Write>,
) -> Result<SearchResult> {
    problem.check_dims(net)?;
    let start = Instant::now();
    let bounds = compute_bounds(net, &problem.input, config.preprocess)?;
    let remaining = config.timeout.saturating_sub(start.elapsed());
    let config = SearchConfig {
        timeout: remaining,
        ..config.clone()
    };
    let mut result = optimize_with_bounds(net, problem, &bounds, &config, trace)?;
    result.stats.wall = start.elapsed();
    Ok(result)
}

/// Branch and bound with precomputed bounds.
pub fn optimize_with_bounds(
    net: &Network,
    problem: &OptimizationProblem,
    bounds: &BoundsMap,
    config: &SearchConfig,
    trace: Option<&mut dyn Write>,
) -> Result<SearchResult> {
    problem.check_dims(net)?;
    let root = PartialActivationState::from_fixed(net, &fixed_by_bounds(bounds));

    let output_only = problem.objective.t == 0.0 && problem.objective.x.iter().all(|&c| c == 0.0);
    let box_only = problem.rows.is_empty() && problem.epigraph.is_none() && output_only;
    let initial = if config.warm_start == WarmStart::Pgd && box_only {
        let x0 = problem.input.center();
        let c = &problem.objective.y;
        let (x, value) = pgd(net, &x0, c, &problem.input, &PgdConfig::default())?;
        Some(Incumbent { value, argopt: x })
    } else {
        None
    };

    let mut relaxation = NetworkRelaxation {
        net,
        problem,
        bounds,
        deadline: Some(Instant::now() + config.timeout),
    };
    branch_and_bound(net, root, &mut relaxation, config, initial, trace)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::geometry::Hyperrectangle;
    use crate::lp::Relation;
    use crate::model::{Activation, Layer, Matrix};
    use crate::problem::{LinearForm, OutputRow};

    fn relu_net() -> Network {
        Network::new(vec![
            Layer::new(Matrix::identity(1), vec![0.0], Activation::Relu).unwrap(),
            Layer::new(Matrix::identity(1), vec![0.0], Activation::Identity).unwrap(),
        ])
        .unwrap()
    }

    fn interval_config() -> SearchConfig {
        SearchConfig {
            preprocess: Preprocess::Interval,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn single_relu_maximum() {
        let b = Hyperrectangle::new(vec![-1.0], vec![2.0]).unwrap();
        let p = OptimizationProblem::output_max(b, vec![1.0]);
        let r = optimize(&relu_net(), &p, &SearchConfig::default()).unwrap();
        assert_eq!(r.status, SearchStatus::Optimal);
        assert!((r.value.unwrap() - 2.0).abs() < 1e-9);
        assert!((r.argopt.unwrap()[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn unreachable_output_row_is_infeasible() {
        let b = Hyperrectangle::new(vec![-1.0], vec![2.0]).unwrap();
        let row = OutputRow::new(LinearForm::on_output(1, vec![1.0]), Relation::Le, -1.0);
        let p = OptimizationProblem::output_max(b, vec![1.0]).with_rows(vec![row]);
        let r = optimize(&relu_net(), &p, &interval_config()).unwrap();
        assert_eq!(r.status, SearchStatus::Infeasible);
        assert!(r.value.is_none());
    }

    fn two_relu_net() -> Network {
        Network::new(vec![
            Layer::new(
                Matrix::from_rows(vec![vec![1.0], vec![-1.0]]).unwrap(),
                vec![0.0, 0.0],
                Activation::Relu,
            )
            .unwrap(),
            Layer::new(
                Matrix::from_rows(vec![vec![1.0, 1.0]]).unwrap(),
                vec![0.0],
                Activation::Identity,
            )
            .unwrap(),
        ])
        .unwrap()
    }

    fn values(pre: [f64; 2], post: [f64; 2]) -> NodeValues {
        NodeValues {
            pre: vec![pre.to_vec()],
            post: vec![post.to_vec()],
        }
    }

    /// Relaxation results looked up by state fingerprint.
    struct Scripted(HashMap<&'static str, RelaxedRegion>);

    impl RegionRelaxation for Scripted {
        fn relax(&mut self, state: &PartialActivationState) -> Result<RelaxedRegion> {
            Ok(self.0[state.fingerprint().as_str()].clone())
        }
    }

    fn solved(bound: f64, v: NodeValues) -> RelaxedRegion {
        RelaxedRegion::Solved {
            bound,
            input: vec![0.0],
            values: v,
            exact_value: bound,
        }
    }

    fn scripted_tree() -> Scripted {
        Scripted(HashMap::from([
            // root violates node 0 more than node 1
            ("UU", solved(20.0, values([-1.0, -0.5], [2.0, 0.5]))),
            ("AU", solved(17.0, values([1.0, -1.0], [1.0, 3.0]))),
            ("NU", RelaxedRegion::Infeasible),
            ("AA", solved(9.0, values([1.0, 2.0], [1.0, 2.0]))),
            ("AN", solved(7.0, values([1.0, -1.0], [1.0, 0.0]))),
        ]))
    }

    #[test]
    fn worked_tree_prunes_the_bound_seven_region() {
        let net = two_relu_net();
        for order in [NodeOrder::BestFirst, NodeOrder::DepthFirst] {
            let config = SearchConfig {
                order,
                ..SearchConfig::default()
            };
            let mut trace = Vec::new();
            let r = branch_and_bound(
                &net,
                PartialActivationState::all_undetermined(&net),
                &mut scripted_tree(),
                &config,
                None,
                Some(&mut trace),
            )
            .unwrap();
            assert_eq!(r.status, SearchStatus::Optimal);
            assert_eq!(r.value, Some(9.0));
            let lines: Vec<serde_json::Value> = String::from_utf8(trace)
                .unwrap()
                .lines()
                .map(|l| serde_json::from_str(l).unwrap())
                .collect();
            let an = lines.iter().find(|l| l["state"] == "AN").unwrap();
            assert_eq!(an["status"], "WorseThanOpt");
            assert_eq!(an["incumbent"], 9.0);
            assert_eq!(an["lp_bound"], 7.0);
        }
    }

    #[test]
    fn region_with_bound_below_incumbent_is_worse() {
        let net = two_relu_net();
        let out = classify_region(
            &net,
            solved(7.0, values([1.0, -1.0], [1.0, 0.0])),
            true,
            9.0,
            &SearchConfig::default(),
        )
        .unwrap();
        assert_eq!(out, RegionOutcome::WorseThanOpt { lp_bound: 7.0 });
    }

    #[test]
    fn split_strategies() {
        let net = two_relu_net();
        let root = PartialActivationState::all_undetermined(&net);
        let (a, n) = split(&root, SplitStrategy::EarliestUnfixed, None).unwrap();
        assert_eq!(a.fingerprint(), "AU");
        assert_eq!(n.fingerprint(), "NU");
        // violations 0.1 at node 0, 0.7 at node 1
        let v = values([0.5, -1.0], [0.6, 0.7]);
        let (a, n) = split(&root, SplitStrategy::LargestViolation, Some(&v)).unwrap();
        assert_eq!(a.fingerprint(), "UA");
        assert_eq!(n.fingerprint(), "UN");
        // no violation falls back to the earliest node
        let v = values([0.5, -1.0], [0.5, 0.0]);
        let (a, _) = split(&root, SplitStrategy::LargestViolation, Some(&v)).unwrap();
        assert_eq!(a.fingerprint(), "AU");
        let leaf = a.with_phase(NodeId::new(0, 1), Phase::Inactive);
        assert!(matches!(
            split(&leaf, SplitStrategy::EarliestUnfixed, None),
            Err(Error::NoUndetermined)
        ));
    }

    #[test]
    fn complete_state_is_never_unknown() {
        let net = two_relu_net();
        let b = Hyperrectangle::new(vec![-1.0], vec![2.0]).unwrap();
        let p = OptimizationProblem::output_max(b.clone(), vec![1.0]);
        let bounds = propagate_interval(&net, &b).unwrap();
        for (p0, p1) in [
            (Phase::Active, Phase::Active),
            (Phase::Active, Phase::Inactive),
            (Phase::Inactive, Phase::Active),
            (Phase::Inactive, Phase::Inactive),
        ] {
            let s = PartialActivationState::all_undetermined(&net)
                .with_phase(NodeId::new(0, 0), p0)
                .with_phase(NodeId::new(0, 1), p1);
            let out = optimum_for_region(
                &net,
                &p,
                &s,
                &bounds,
                f64::NEG_INFINITY,
                &SearchConfig::default(),
            )
            .unwrap();
            assert!(!matches!(out, RegionOutcome::Unknown { .. }), "{out:?}");
        }
    }

    #[test]
    fn expired_timeout_reports_timeout() {
        let b = Hyperrectangle::new(vec![-1.0], vec![2.0]).unwrap();
        let p = OptimizationProblem::output_max(b, vec![1.0]);
        let config = SearchConfig {
            timeout: Duration::ZERO,
            ..interval_config()
        };
        let r = optimize(&two_relu_net(), &p, &config).unwrap();
        assert_eq!(r.status, SearchStatus::Timeout);
    }

    #[test]
    fn pgd_warm_start_gives_same_optimum() {
        let b = Hyperrectangle::new(vec![-1.0], vec![2.0]).unwrap();
        let p = OptimizationProblem::output_max(b, vec![1.0]);
        let config = SearchConfig {
            warm_start: WarmStart::Pgd,
            ..interval_config()
        };
        let r = optimize(&two_relu_net(), &p, &config).unwrap();
        assert_eq!(r.status, SearchStatus::Optimal);
        assert!((r.value.unwrap() - 2.0).abs() < 1e-9);
    }
}
