//! Optimization by repeated yes/no verification queries.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use crate::bounds::BoundsMap;
use crate::error::{Error, Result};
use crate::geometry::Hyperrectangle;
use crate::lp::Relation;
use crate::model::Network;
use crate::problem::{OptimizationProblem, OutputRow, ProblemKind};
use crate::search::{
    compute_bounds, optimize_with_bounds, SearchConfig, SearchResult, SearchStats, SearchStatus,
};

/// Outcome of a verification query.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Holds,
    /// A point violating the property.
    Violated(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BracketPolicy {
    /// Output optimization: grow the upper end from `max(1, 2|v(center)|)`
    /// by doubling. Min-adversarial: bisect `[0, radius]`.
    Doubling,
    /// Start from this bracket: objective values for output optimization,
    /// distances for min-adversarial problems.
    Given(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionConfig {
    pub gap: f64,
    pub bracket: BracketPolicy,
    /// Settings of each verification query; its `timeout` is per call.
    pub search: SearchConfig,
    pub timeout: Duration,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            gap: 1e-4,
            bracket: BracketPolicy::Doubling,
            search: SearchConfig::default(),
            timeout: Duration::from_secs(120),
        }
    }
}

/// Decision procedure with node bounds cached per input box.
struct Verifier<'a> {
    net: &'a Network,
    search: SearchConfig,
    cache: HashMap<Vec<u64>, BoundsMap>,
    deadline: Instant,
    stats: SearchStats,
}

impl<'a> Verifier<'a> {
    fn new(net: &'a Network, search: &SearchConfig, deadline: Instant) -> Self {
        Self {
            net,
            search: search.clone().feasibility(),
            cache: HashMap::new(),
            deadline,
            stats: SearchStats::default(),
        }
    }

    fn bounds(&mut self, input: &Hyperrectangle) -> Result<BoundsMap> {
        let key: Vec<u64> = input
            .lower()
            .iter()
            .chain(input.upper())
            .map(|v| v.to_bits())
            .collect();
        if let Some(b) = self.cache.get(&key) {
            return Ok(b.clone());
        }
        let b = compute_bounds(self.net, input, self.search.preprocess)?;
        self.cache.insert(key, b.clone());
        Ok(b)
    }

    /// A point satisfying every constraint of `problem`, if one exists.
    fn witness(&mut self, problem: &OptimizationProblem) -> Result<Option<Vec<f64>>> {
        let remaining = self.deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            return Err(Error::DeadlineExceeded);
        }
        let bounds = self.bounds(&problem.input)?;
        let config = SearchConfig {
            timeout: self.search.timeout.min(remaining),
            ..self.search.clone()
        };
        let r = optimize_with_bounds(self.net, &problem.feasibility(), &bounds, &config, None)?;
        self.stats.nodes += r.stats.nodes;
        self.stats.lps += r.stats.lps;
        self.stats.peak_frontier = self.stats.peak_frontier.max(r.stats.peak_frontier);
        match r.status {
            SearchStatus::Optimal => Ok(r.argopt),
            SearchStatus::Infeasible => Ok(None),
            SearchStatus::Timeout => Err(Error::DeadlineExceeded),
        }
    }
}

/// Does every `x ∈ input` satisfying `rows` also satisfy `threshold`?
///
/// Searches the closed complement of `threshold`, so a witness may lie on
/// the threshold's boundary.
pub fn verify_decision(
    net: &Network,
    input: &Hyperrectangle,
    rows: &[OutputRow],
    threshold: &OutputRow,
    config: &SearchConfig,
) -> Result<Decision> {
    if threshold.relation == Relation::Eq {
        return Err(Error::Unsupported("threshold must be an inequality".into()));
    }
    let mut rows = rows.to_vec();
    rows.push(threshold.reversed());
    let problem =
        OptimizationProblem::output_max(input.clone(), vec![0.0; net.output_dim()]).with_rows(rows);
    problem.check_dims(net)?;
    let mut verifier = Verifier::new(net, config, Instant::now() + config.timeout);
    Ok(match verifier.witness(&problem)? {
        Some(x) => Decision::Violated(x),
        None => Decision::Holds,
    })
}

/// Bisection on the optimal value using [`verify_decision`]-style queries.
///
/// Output optimization brackets the maximum from above by doubling, then
/// halves `[ℓ, u]` until `u − ℓ ≤ gap`; the value reported is `ℓ`, attained
/// by the returned witness. Min-adversarial problems bisect the distance
/// starting at half the region's radius and report `Infeasible` when no
/// adversarial input turns up within `gap` of the region's boundary.
pub fn bisection_optimize(
    net: &Network,
    problem: &OptimizationProblem,
    config: &BisectionConfig,
) -> Result<SearchResult> {
    problem.check_dims(net)?;
    if !(config.gap > 0.0) {
        return Err(Error::Unsupported("bisection gap must be positive".into()));
    }
    let start = Instant::now();
    let mut verifier = Verifier::new(net, &config.search, start + config.timeout);
    let outcome = match problem.kind {
        ProblemKind::MinAdversarial if problem.epigraph.is_some() => {
            bisect_distance(&mut verifier, problem, config)
        }
        _ => bisect_value(&mut verifier, problem, config),
    };
    let mut stats = verifier.stats.clone();
    stats.wall = start.elapsed();
    let result = match outcome {
        Ok(Found::Solved {
            value,
            argopt,
            bracket,
        }) => SearchResult {
            status: SearchStatus::Optimal,
            value: Some(value),
            argopt: Some(argopt),
            stats,
            bracket: Some(bracket),
        },
        Ok(Found::Infeasible) => SearchResult::infeasible(stats),
        Err(Interrupted::Timeout { best, bracket }) => {
            let (value, argopt) = match best {
                Some((v, x)) => (Some(v), Some(x)),
                None => (None, None),
            };
            SearchResult {
                status: SearchStatus::Timeout,
                value,
                argopt,
                stats,
                bracket,
            }
        }
        Err(Interrupted::Failed(e)) => return Err(e),
    };
    Ok(result)
}

enum Found {
    Solved {
        value: f64,
        argopt: Vec<f64>,
        bracket: (f64, f64),
    },
    Infeasible,
}

enum Interrupted {
    Timeout {
        best: Option<(f64, Vec<f64>)>,
        bracket: Option<(f64, f64)>,
    },
    Failed(Error),
}

fn interrupted(
    e: Error,
    best: &Option<(f64, Vec<f64>)>,
    bracket: Option<(f64, f64)>,
) -> Interrupted {
    match e {
        Error::DeadlineExceeded => Interrupted::Timeout {
            best: best.clone(),
            bracket,
        },
        e => Interrupted::Failed(e),
    }
}

const MAX_STEPS: usize = 200;

fn bisect_value(
    verifier: &mut Verifier<'_>,
    problem: &OptimizationProblem,
    config: &BisectionConfig,
) -> Result<Found, Interrupted> {
    let net = verifier.net;
    let eval = |x: &[f64]| problem.objective_at(net, x).map_err(Interrupted::Failed);
    let at_least = |v: f64| {
        let mut p = problem.clone();
        p.rows
            .push(OutputRow::new(problem.objective.clone(), Relation::Ge, v));
        p
    };

    // a feasible point anchors the lower end
    let center = problem.input.center();
    let mut best: (f64, Vec<f64>) = if problem
        .is_feasible(net, &center, 0.0)
        .map_err(Interrupted::Failed)?
    {
        (eval(&center)?, center.clone())
    } else {
        match verifier.witness(problem) {
            Ok(Some(x)) => (eval(&x)?, x),
            Ok(None) => return Ok(Found::Infeasible),
            Err(e) => return Err(interrupted(e, &None, None)),
        }
    };

    let (mut lo, mut hi) = match config.bracket {
        BracketPolicy::Given(l, u) => (l.max(best.0), u),
        BracketPolicy::Doubling => {
            let mut u = 1f64.max(2.0 * eval(&center)?.abs());
            loop {
                let snapshot = Some(best.clone());
                match verifier.witness(&at_least(u)) {
                    Ok(Some(x)) => {
                        let v = eval(&x)?;
                        if v > best.0 {
                            best = (v, x);
                        }
                        u = 2.0 * u.max(best.0);
                    }
                    Ok(None) => break,
                    Err(e) => return Err(interrupted(e, &snapshot, None)),
                }
            }
            (best.0, u)
        }
    };

    for _ in 0..MAX_STEPS {
        if hi - lo <= config.gap {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match verifier.witness(&at_least(mid)) {
            Ok(Some(x)) => {
                let v = eval(&x)?;
                if v > best.0 {
                    best = (v, x);
                }
                lo = lo.max(best.0);
            }
            Ok(None) => hi = mid,
            Err(e) => return Err(interrupted(e, &Some(best), Some((lo, hi)))),
        }
    }
    Ok(Found::Solved {
        value: best.0,
        argopt: best.1,
        bracket: (lo, hi),
    })
}

fn bisect_distance(
    verifier: &mut Verifier<'_>,
    problem: &OptimizationProblem,
    config: &BisectionConfig,
) -> Result<Found, Interrupted> {
    let epi = problem.epigraph.as_ref().expect("checked by caller");
    let input = &problem.input;
    let radius = epi
        .dims
        .iter()
        .map(|&i| (input.upper()[i] - epi.center[i]).max(epi.center[i] - input.lower()[i]))
        .fold(0.0, f64::max);

    // the region within distance d of the center, without the epigraph
    let within = |d: f64| -> Result<Option<OptimizationProblem>> {
        let mut lower = input.lower().to_vec();
        let mut upper = input.upper().to_vec();
        for &i in &epi.dims {
            lower[i] = lower[i].max(epi.center[i] - d);
            upper[i] = upper[i].min(epi.center[i] + d);
            if lower[i] > upper[i] {
                return Ok(None);
            }
        }
        let mut p = problem.clone();
        p.input = Hyperrectangle::new(lower, upper)?;
        p.epigraph = None;
        p.objective.t = 0.0;
        Ok(Some(p))
    };

    let (mut lo, mut hi) = match config.bracket {
        BracketPolicy::Given(l, u) => (l.max(0.0), u.min(radius)),
        BracketPolicy::Doubling => (0.0, radius),
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut first = true;
    for _ in 0..MAX_STEPS {
        if hi - lo <= config.gap && !first {
            break;
        }
        let d = if first && matches!(config.bracket, BracketPolicy::Doubling) {
            0.5 * radius
        } else {
            0.5 * (lo + hi)
        };
        first = false;
        let Some(p) = within(d).map_err(Interrupted::Failed)? else {
            lo = d;
            continue;
        };
        match verifier.witness(&p) {
            Ok(Some(x)) => {
                let dist = epi.distance(&x);
                hi = dist.min(d);
                if best.as_ref().map_or(true, |(v, _)| -dist > *v) {
                    best = Some((-dist, x));
                }
            }
            Ok(None) => lo = d,
            Err(e) => return Err(interrupted(e, &best, Some((-hi, -lo)))),
        }
    }
    Ok(match best {
        Some((value, argopt)) => Found::Solved {
            value,
            argopt,
            bracket: (-hi, -lo),
        },
        None => Found::Infeasible,
    })
}
