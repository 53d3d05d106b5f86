//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reluopt::baselines::{
    bisection_optimize, brute_force_optimize, export_milp, parse_lp_format, BisectionConfig,
};
use reluopt::bounds::{fixed_by_bounds, propagate_interval, tighten_lp};
use reluopt::geometry::Hyperrectangle;
use reluopt::lp::{
    build_relaxed_lp, check_relu_consistency, solve_lp, LpResult, NodeValues, Relation,
};
use reluopt::model::{random_network, Activation, Layer, Matrix};
use reluopt::problem::{Epigraph, LinearForm, OptimizationProblem, OutputRow};
use reluopt::search::{
    branch_and_bound, optimize, split, NodeOrder, PartialActivationState, Phase, RegionRelaxation,
    RelaxedRegion, SearchConfig, SearchStatus, SplitStrategy,
};
use reluopt::{Network, Result as CoreResult};
use reluopt_cli::bench::{load_dir, run_benchmark, without_wall_time, LoadedProblem, RecordStatus};
use reluopt_cli::spec::{ConfigOverrides, DirectionName, ProblemSpec, SpecKind};
use reluopt_cli::{canonicalize, generate_queries, write_queries, Family, SolverKind};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 2–3 inputs, 1–2 outputs, one or two hidden layers with `relus` ReLUs.
fn oracle_net(rng: &mut ChaCha8Rng, relus: usize) -> Network {
    let n = rng.gen_range(2..=3);
    let m = rng.gen_range(1..=2);
    let mut dims = vec![n];
    if relus >= 6 && rng.gen_bool(0.5) {
        let first = rng.gen_range(2..=relus - 2);
        dims.extend([first, relus - first]);
    } else {
        dims.push(relus);
    }
    dims.push(m);
    random_network(rng, &dims).unwrap()
}

fn random_box(rng: &mut ChaCha8Rng, n: usize) -> Hyperrectangle {
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.5)).collect();
    Hyperrectangle::new(
        c.iter().zip(&r).map(|(c, r)| c - r).collect(),
        c.iter().zip(&r).map(|(c, r)| c + r).collect(),
    )
    .unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn sample(rng: &mut ChaCha8Rng, b: &Hyperrectangle) -> Vec<f64> {
    b.lower()
        .iter()
        .zip(b.upper())
        .map(|(&l, &u)| if l == u { l } else { rng.gen_range(l..=u) })
        .collect()
}

/// Smallest perturbation moving the first output past a random target.
fn min_adv_query(rng: &mut ChaCha8Rng, net: &Network) -> OptimizationProblem {
    let b = random_box(rng, net.input_dim());
    let x0 = b.center();
    let y0 = net.evaluate(&x0).unwrap();
    let mut c = vec![0.0; net.output_dim()];
    c[0] = 1.0;
    let target = y0[0] + rng.gen_range(-0.25..0.25);
    let rel = if target >= y0[0] {
        Relation::Ge
    } else {
        Relation::Le
    };
    let row = OutputRow::new(LinearForm::on_output(net.input_dim(), c), rel, target);
    OptimizationProblem::min_adversarial(b, Epigraph::full(x0), vec![row], net.output_dim())
}

fn oracle_suite(seed: u64, count: usize) -> Vec<(Network, OptimizationProblem)> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for i in 0..count {
        let relus = rng.gen_range(4..=12);
        let net = oracle_net(&mut rng, relus);
        let p = if i % 2 == 0 {
            let b = random_box(&mut rng, net.input_dim());
            OptimizationProblem::output_max(b, random_vec(&mut rng, net.output_dim()))
        } else {
            min_adv_query(&mut rng, &net)
        };
        out.push((net, p));
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let suite = oracle_suite(1001, 240);
    let config = SearchConfig::default();
    let (mut optimal, mut infeasible) = (0, 0);
    for (i, (net, p)) in suite.iter().enumerate() {
        let got = optimize(net, p, &config).map_err(|e| format!("query {i}: {e}"))?;
        let want = brute_force_optimize(net, p).map_err(|e| format!("query {i}: {e}"))?;
        ensure(got.status == want.status, || {
            format!("query {i}: {:?} vs oracle {:?}", got.status, want.status)
        })?;
        if got.status == SearchStatus::Optimal {
            let (g, w) = (got.value.unwrap(), want.value.unwrap());
            ensure((g - w).abs() <= 1e-5, || {
                format!("query {i}: {g} vs oracle {w}")
            })?;
            optimal += 1;
        } else {
            infeasible += 1;
        }
    }
    Ok(format!(
        "{} queries ({optimal} optimal, {infeasible} infeasible)",
        suite.len()
    ))
}

struct Scripted(HashMap<&'static str, RelaxedRegion>);

impl RegionRelaxation for Scripted {
    fn relax(&mut self, state: &PartialActivationState) -> CoreResult<RelaxedRegion> {
        Ok(self.0[state.fingerprint().as_str()].clone())
    }
}

fn scripted_tree() -> Outcome {
    let net = Network::new(vec![
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
    .unwrap();
    let solved = |bound: f64, pre: [f64; 2], post: [f64; 2]| RelaxedRegion::Solved {
        bound,
        input: vec![0.0],
        values: NodeValues {
            pre: vec![pre.to_vec()],
            post: vec![post.to_vec()],
        },
        exact_value: bound,
    };
    for order in [NodeOrder::BestFirst, NodeOrder::DepthFirst] {
        let mut script = Scripted(HashMap::from([
            ("UU", solved(20.0, [-1.0, -0.5], [2.0, 0.5])),
            ("AU", solved(17.0, [1.0, -1.0], [1.0, 3.0])),
            ("NU", RelaxedRegion::Infeasible),
            ("AA", solved(9.0, [1.0, 2.0], [1.0, 2.0])),
            ("AN", solved(7.0, [1.0, -1.0], [1.0, 0.0])),
        ]));
        let config = SearchConfig {
            order,
            ..SearchConfig::default()
        };
        let mut trace = Vec::new();
        let r = branch_and_bound(
            &net,
            PartialActivationState::all_undetermined(&net),
            &mut script,
            &config,
            None,
            Some(&mut trace),
        )
        .map_err(|e| e.to_string())?;
        ensure(
            r.status == SearchStatus::Optimal && r.value == Some(9.0),
            || format!("{order:?}: {:?} {:?}", r.status, r.value),
        )?;
        let text = String::from_utf8(trace).unwrap();
        let an: serde_json::Value = text
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
            .find(|l| l["state"] == "AN")
            .ok_or("bound-7 region never visited")?;
        ensure(
            an["status"] == "WorseThanOpt" && an["incumbent"] == 9.0 && an["lp_bound"] == 7.0,
            || format!("{order:?}: bound-7 region recorded as {an}"),
        )?;
    }
    Ok("optimum 9, bound-7 region pruned under both orders".into())
}

fn bisection_agreement() -> Outcome {
    let suite = oracle_suite(1003, 50);
    let config = BisectionConfig::default();
    let mut worst: f64 = 0.0;
    let mut infeasible = 0;
    for (i, (net, p)) in suite.iter().enumerate() {
        let exact = optimize(net, p, &SearchConfig::default()).map_err(|e| e.to_string())?;
        let bis = bisection_optimize(net, p, &config).map_err(|e| e.to_string())?;
        if p.epigraph.is_some() {
            let oracle = brute_force_optimize(net, p).map_err(|e| e.to_string())?;
            let a = oracle.status == SearchStatus::Infeasible;
            let b = bis.status == SearchStatus::Infeasible;
            ensure(a == b, || {
                format!(
                    "query {i}: bisection {:?}, oracle {:?}",
                    bis.status, oracle.status
                )
            })?;
            infeasible += a as usize;
        }
        ensure(bis.status == exact.status, || {
            format!("query {i}: {:?} vs {:?}", bis.status, exact.status)
        })?;
        if let (Some(a), Some(b)) = (bis.value, exact.value) {
            worst = worst.max((a - b).abs());
            ensure((a - b).abs() <= 2e-4, || format!("query {i}: {a} vs {b}"))?;
        }
    }
    Ok(format!(
        "50 queries, max gap {worst:.2e}, {infeasible} infeasible decisions agree"
    ))
}

fn output_spec(p: &OptimizationProblem) -> ProblemSpec {
    ProblemSpec {
        network: "inline.nnet".into(),
        solver: SolverKind::BranchBound,
        kind: SpecKind::OutputOptimization {
            objective: p.objective.y.clone(),
            direction: DirectionName::Maximize,
            lower: p.input.lower().to_vec(),
            upper: p.input.upper().to_vec(),
            rows: vec![],
        },
        config: ConfigOverrides::default(),
    }
}

fn approximate_lower_bounds() -> Outcome {
    let mut rng = rng(1004);
    let problems: Vec<LoadedProblem> = (0..100)
        .map(|i| {
            let relus = rng.gen_range(4..=12);
            let net = oracle_net(&mut rng, relus);
            let b = random_box(&mut rng, net.input_dim());
            let p = OptimizationProblem::output_max(b, random_vec(&mut rng, net.output_dim()));
            LoadedProblem {
                id: format!("q{i:03}"),
                problem: Ok((output_spec(&p), net)),
            }
        })
        .collect();
    let out = run_benchmark(
        &problems,
        &[SolverKind::BranchBound, SolverKind::Fgsm, SolverKind::Pgd],
        None,
    );
    for r in &out.records {
        ensure(r.status == RecordStatus::Optimal, || {
            format!(
                "{} {}: {:?} {:?}",
                r.problem_id,
                r.solver.name(),
                r.status,
                r.message
            )
        })?;
    }
    let mut rows = 0;
    let mut worst_gap: f64 = 0.0;
    for line in out.scatter.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let x: f64 = cols[2].parse().map_err(|_| line.to_string())?;
        let y: f64 = cols[3].parse().map_err(|_| line.to_string())?;
        ensure(y <= x + 1e-6, || {
            format!("scatter row above the diagonal: {line}")
        })?;
        worst_gap = worst_gap.max(x - y);
        rows += 1;
    }
    ensure(rows == 200, || {
        format!("expected 200 scatter rows, found {rows}")
    })?;
    Ok(format!(
        "200 attack values below the optimum, largest gap {worst_gap:.3}"
    ))
}

fn relaxation_invariants() -> Outcome {
    let mut rng = rng(1005);
    let (mut pairs, mut leaves) = (0, 0);
    while pairs < 1000 {
        let relus = rng.gen_range(4..=10);
        let net = oracle_net(&mut rng, relus);
        let b = random_box(&mut rng, net.input_dim());
        let bounds = propagate_interval(&net, &b).unwrap();
        let p = OptimizationProblem::output_max(b, random_vec(&mut rng, net.output_dim()));
        let mut state = PartialActivationState::from_fixed(&net, &fixed_by_bounds(&bounds));
        // a random partial state below the root
        for id in state.undetermined() {
            if rng.gen_bool(0.3) {
                let phase = if rng.gen_bool(0.5) {
                    Phase::Active
                } else {
                    Phase::Inactive
                };
                state = state.with_phase(id, phase);
            }
        }
        let bound_of = |s: &PartialActivationState| -> Result<(LpResult, Option<f64>), String> {
            let (lp, _) = build_relaxed_lp(&net, s, &bounds, &p).map_err(|e| e.to_string())?;
            let r = solve_lp(&lp).map_err(|e| e.to_string())?;
            let b = match &r {
                LpResult::Infeasible => Some(f64::NEG_INFINITY),
                _ => r.objective(),
            };
            Ok((r, b))
        };
        while !state.is_complete() {
            let strategy = if rng.gen_bool(0.5) {
                SplitStrategy::EarliestUnfixed
            } else {
                SplitStrategy::LargestViolation
            };
            let (a, n) = split(&state, strategy, None).map_err(|e| e.to_string())?;
            let (_, parent) = bound_of(&state)?;
            let child = if rng.gen_bool(0.5) { a } else { n };
            let (_, cb) = bound_of(&child)?;
            if let (Some(pb), Some(cb)) = (parent, cb) {
                ensure(cb <= pb + 1e-6, || {
                    format!("child bound {cb} above parent {pb}")
                })?;
            }
            pairs += 1;
            state = child;
        }
        let (lp, map) = build_relaxed_lp(&net, &state, &bounds, &p).map_err(|e| e.to_string())?;
        if let LpResult::Optimal { assignment, .. } = solve_lp(&lp).map_err(|e| e.to_string())? {
            let values = map.node_values(&net, &assignment);
            let bad = check_relu_consistency(&net, &values, 1e-6);
            ensure(bad.is_empty(), || {
                format!("leaf LP inconsistent at {bad:?}")
            })?;
            leaves += 1;
        }
    }
    ensure(leaves > 0, || "no feasible leaf reached".into())?;
    Ok(format!(
        "{pairs} pairs, {leaves} feasible leaves consistent"
    ))
}

fn bound_soundness() -> Outcome {
    let mut rng = rng(1006);
    let mut tighter = 0;
    for i in 0..20 {
        let relus = rng.gen_range(4..=12);
        let net = oracle_net(&mut rng, relus);
        let b = random_box(&mut rng, net.input_dim());
        let ib = propagate_interval(&net, &b).map_err(|e| e.to_string())?;
        let lb = tighten_lp(&net, &b, &ib, Duration::from_secs(1)).map_err(|e| e.to_string())?;
        let noop = tighten_lp(&net, &b, &ib, Duration::ZERO).map_err(|e| e.to_string())?;
        ensure(noop == ib, || {
            format!("net {i}: zero timeout changed the bounds")
        })?;
        ensure(lb.is_subset_of(&ib, 0.0), || {
            format!("net {i}: tightened bounds escape")
        })?;
        tighter += (lb != ib) as usize;
        for _ in 0..10_000 {
            let x = sample(&mut rng, &b);
            let trace = net.forward(&x).unwrap();
            for (k, (pre, post)) in trace.pre.iter().zip(&trace.post).enumerate() {
                for j in 0..pre.len() {
                    for (name, m) in [("interval", &ib), ("lp", &lb)] {
                        ensure(
                            m.layer_pre(k)[j].contains(pre[j], 1e-9)
                                && m.layer_post(k)[j].contains(post[j], 1e-9),
                            || format!("net {i}: {name} bound misses node {k},{j} at {x:?}"),
                        )?;
                    }
                }
            }
        }
    }
    Ok(format!(
        "20 nets x 10^4 samples, {tighter} nets strictly tightened"
    ))
}

fn gradient_check() -> Outcome {
    let mut rng = rng(1007);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let relus = rng.gen_range(4..=12);
        let net = oracle_net(&mut rng, relus);
        let c = random_vec(&mut rng, net.output_dim());
        let f = |x: &[f64]| -> f64 {
            net.evaluate(x)
                .unwrap()
                .iter()
                .zip(&c)
                .map(|(y, c)| y * c)
                .sum()
        };
        let mut points = 0;
        while points < 20 {
            let x = random_vec(&mut rng, net.input_dim());
            let trace = net.forward(&x).unwrap();
            let margin = net
                .relu_layers()
                .iter()
                .flat_map(|&k| trace.pre[k].iter().map(|v| v.abs()))
                .fold(f64::INFINITY, f64::min);
            // stay clear of kinks for every probe step
            if margin < 1e-2 {
                continue;
            }
            points += 1;
            let g = net.gradient(&x, &c).map_err(|e| e.to_string())?;
            let fd: Vec<f64> = (0..x.len())
                .map(|d| {
                    let (mut a, mut b) = (x.clone(), x.clone());
                    a[d] += h;
                    b[d] -= h;
                    (f(&a) - f(&b)) / (2.0 * h)
                })
                .collect();
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = g
                .iter()
                .zip(&fd)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let rel = if scale == 0.0 { err } else { err / scale };
            worst = worst.max(rel);
            ensure(rel <= 1e-4, || format!("net {i} at {x:?}: {g:?} vs {fd:?}"))?;
        }
    }
    Ok(format!("400 points, max relative error {worst:.2e}"))
}

fn milp_fidelity() -> Outcome {
    let mut rng = rng(1008);
    let (mut models, mut feasible, mut checked) = (0, 0, 0);
    while models < 10 {
        let relus = rng.gen_range(4..=8);
        let net = oracle_net(&mut rng, relus);
        let b = random_box(&mut rng, net.input_dim());
        let p = OptimizationProblem::output_max(b.clone(), random_vec(&mut rng, net.output_dim()));
        let bounds = propagate_interval(&net, &b).unwrap();
        let m = export_milp(&net, &p, &bounds).map_err(|e| e.to_string())?;
        if m.binaries.is_empty() || m.binaries.len() > 6 {
            continue;
        }
        models += 1;
        let text = m.to_lp_format();
        let reparsed = parse_lp_format(&text).map_err(|e| format!("re-parse: {e}"))?;
        ensure(reparsed.lp.names() == m.lp.names(), || {
            "re-parsed columns differ".into()
        })?;
        ensure(reparsed.binary_columns() == m.binary_columns(), || {
            "re-parsed binaries differ".into()
        })?;
        let map = m.map.as_ref().unwrap();
        let root = PartialActivationState::from_fixed(&net, &fixed_by_bounds(&bounds));
        for mask in 0..(1usize << m.binaries.len()) {
            let on: Vec<bool> = (0..m.binaries.len()).map(|i| mask >> i & 1 == 1).collect();
            let milp = m.with_binaries(&on).map_err(|e| e.to_string())?;
            let milp2 = reparsed.with_binaries(&on).map_err(|e| e.to_string())?;
            let mut leaf = root.clone();
            for (&(id, _), &a) in m.binaries.iter().zip(&on) {
                leaf = leaf.with_phase(id, if a { Phase::Active } else { Phase::Inactive });
            }
            let (leaf_lp, _) = build_relaxed_lp(&net, &leaf, &bounds, &p).unwrap();
            for _ in 0..1000 {
                let x = sample(&mut rng, &b);
                let mut trace = net.forward(&x).unwrap();
                // half the points leave the ReLU graph
                if rng.gen_bool(0.5) {
                    for k in 0..trace.post.len() {
                        for j in 0..trace.post[k].len() {
                            if rng.gen_bool(0.2) {
                                trace.post[k][j] += rng.gen_range(-0.3..0.3);
                            }
                        }
                        if k + 1 < net.layers().len() {
                            trace.pre[k + 1] = net.layers()[k + 1].affine(&trace.post[k]);
                        }
                    }
                }
                let t = rng.gen_range(-3.0..3.0);
                let a = map.assignment_of(&trace, leaf_lp.num_vars(), t);
                let mut am = a.clone();
                am.resize(m.lp.num_vars(), 0.0);
                for (&(_, col), &v) in m.binaries.iter().zip(&on) {
                    am[col] = if v { 1.0 } else { 0.0 };
                }
                let in_leaf = leaf_lp.is_feasible(&a, 1e-9);
                ensure(in_leaf == milp.is_feasible(&am, 1e-9), || {
                    format!("assignment {on:?} disagrees with its leaf")
                })?;
                ensure(in_leaf == milp2.is_feasible(&am, 1e-9), || {
                    format!("re-parsed assignment {on:?} disagrees with its leaf")
                })?;
                feasible += in_leaf as usize;
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{models} models, {checked} points ({feasible} inside the leaf) agree; files re-parse"
    ))
}

fn infeasible_queries() -> Outcome {
    let mut found = 0;
    let mut tried = 0;
    let config = BisectionConfig::default();
    'outer: for seed in 0..40 {
        for q in generate_queries(Family::MnistStyleIn, seed, 10, 10) {
            tried += 1;
            let c = canonicalize(&q.spec, &q.network).map_err(|e| e.to_string())?;
            let p = &c.problems[0];
            let oracle = brute_force_optimize(&q.network, p).map_err(|e| e.to_string())?;
            if oracle.status != SearchStatus::Infeasible {
                continue;
            }
            let a = optimize(&q.network, p, &SearchConfig::default()).map_err(|e| e.to_string())?;
            let b = bisection_optimize(&q.network, p, &config).map_err(|e| e.to_string())?;
            ensure(
                a.status == SearchStatus::Infeasible && b.status == SearchStatus::Infeasible,
                || {
                    format!(
                        "{}: optimize {:?}, bisection {:?}",
                        q.id, a.status, b.status
                    )
                },
            )?;
            found += 1;
            if found >= 8 {
                break 'outer;
            }
        }
    }
    ensure(found >= 5, || {
        format!("only {found} infeasible queries among {tried}")
    })?;
    Ok(format!(
        "{found} infeasible queries (of {tried} generated) answered Infeasible"
    ))
}

fn read_all(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for name in ["results.csv", "summary.csv", "scatter.csv"] {
        let text = fs::read_to_string(dir.join(name)).unwrap_or_default();
        let text = match name {
            "results.csv" => without_wall_time(&text),
            // solved count survives, total time does not
            "summary.csv" => text
                .lines()
                .map(|l| l.rsplit_once(',').map_or(l, |(a, _)| a).to_string())
                .collect::<Vec<_>>()
                .join("\n"),
            _ => text,
        };
        out.push((name.to_string(), text));
    }
    let mut argopt: Vec<_> = fs::read_dir(dir.join("argopt"))
        .map(|d| d.filter_map(|e| e.ok()).map(|e| e.path()).collect())
        .unwrap_or_default();
    argopt.sort();
    for p in argopt {
        out.push((
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read_to_string(&p).unwrap(),
        ));
    }
    out
}

fn determinism() -> Outcome {
    let solvers = [
        SolverKind::BranchBound,
        SolverKind::Bisection,
        SolverKind::BruteForce,
        SolverKind::Fgsm,
        SolverKind::Pgd,
    ];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let work = tempfile::tempdir().map_err(|e| e.to_string())?;
        let problems = work.path().join("problems");
        for f in Family::ALL {
            write_queries(&problems, &generate_queries(f, 77, 3, 8)).map_err(|e| e.to_string())?;
        }
        let loaded = load_dir(&problems).map_err(|e| e.to_string())?;
        let out = run_benchmark(&loaded, &solvers, Some(Duration::from_secs(60)));
        let dir = work.path().join("out");
        reluopt_cli::bench::write_benchmark(&dir, &out).map_err(|e| e.to_string())?;
        runs.push(read_all(&dir));
    }
    ensure(runs[0].len() > 3, || "no argopt files written".into())?;
    ensure(runs[0].len() == runs[1].len(), || {
        "different file sets".into()
    })?;
    for ((name, a), (_, b)) in runs[0].iter().zip(&runs[1]) {
        ensure(a == b, || format!("{name} differs between runs"))?;
    }
    let rows = runs[0][0].1.lines().count() - 1;
    Ok(format!(
        "{rows} result rows and {} files identical",
        runs[0].len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("pruning on the worked search tree", scripted_tree),
        ("bisection agreement", bisection_agreement),
        ("approximate lower bounds", approximate_lower_bounds),
        ("relaxation invariants", relaxation_invariants),
        ("bound soundness", bound_soundness),
        ("gradient check", gradient_check),
        ("milp export fidelity", milp_fidelity),
        ("infeasible queries", infeasible_queries),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}; {secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why}; {secs:.1}s)", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
