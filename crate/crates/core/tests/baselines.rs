//! Reference solvers checked against each other and against enumeration.

mod common;

use rand::Rng;
use reluopt::baselines::{
    bisection_optimize, brute_force_optimize, export_milp, fgsm, parse_lp_format, pgd,
    verify_decision, BisectionConfig, Decision, PgdConfig,
};
use reluopt::bounds::{fixed_by_bounds, propagate_interval};
use reluopt::lp::{build_relaxed_lp, solve_lp, Relation};
use reluopt::problem::{LinearForm, OptimizationProblem, OutputRow};
use reluopt::search::{
    optimize, PartialActivationState, Phase, Preprocess, SearchConfig, SearchStatus,
};

fn interval() -> SearchConfig {
    SearchConfig {
        preprocess: Preprocess::Interval,
        ..SearchConfig::default()
    }
}

#[test]
fn decisions_match_reachable_range() {
    let mut rng = common::rng(41);
    for _ in 0..25 {
        let net = common::small_net(&mut rng, 8);
        let b = common::random_box(&mut rng, net.input_dim());
        let c = common::random_vec(&mut rng, net.output_dim());
        let max =
            brute_force_optimize(&net, &OptimizationProblem::output_max(b.clone(), c.clone()))
                .unwrap()
                .value
                .unwrap();
        for k in 0..5 {
            let theta = max + (k as f64 - 2.0) * 0.3 + rng.gen_range(-0.1..0.1);
            let row = OutputRow::new(
                LinearForm::on_output(net.input_dim(), c.clone()),
                Relation::Le,
                theta,
            );
            match verify_decision(&net, &b, &[], &row, &interval()).unwrap() {
                Decision::Holds => assert!(max <= theta + 1e-6),
                Decision::Violated(x) => {
                    assert!(max >= theta - 1e-6);
                    assert!(b.contains(&x, 1e-9).unwrap());
                    let y = net.evaluate(&x).unwrap();
                    assert!(row.form.eval(&x, &y, 0.0) >= theta - 1e-6);
                }
            }
        }
    }
}

#[test]
fn bisection_agrees_with_branch_and_bound() {
    let mut rng = common::rng(42);
    let cfg = BisectionConfig {
        search: interval(),
        ..BisectionConfig::default()
    };
    for _ in 0..20 {
        let net = common::small_net(&mut rng, 8);
        let b = common::random_box(&mut rng, net.input_dim());
        let p = OptimizationProblem::output_max(b, common::random_vec(&mut rng, net.output_dim()));
        let exact = optimize(&net, &p, &interval()).unwrap().value.unwrap();
        let r = bisection_optimize(&net, &p, &cfg).unwrap();
        assert_eq!(r.status, SearchStatus::Optimal);
        let v = r.value.unwrap();
        assert!((v - exact).abs() <= 2e-4, "{v} vs {exact}");
        let (lo, hi) = r.bracket.unwrap();
        assert!(lo <= exact + 1e-6 && exact <= hi + 1e-6);
    }
}

#[test]
fn attacks_are_lower_bounds() {
    let mut rng = common::rng(43);
    for _ in 0..40 {
        let net = common::small_net(&mut rng, 10);
        let b = common::random_box(&mut rng, net.input_dim());
        let c = common::random_vec(&mut rng, net.output_dim());
        let exact = optimize(
            &net,
            &OptimizationProblem::output_max(b.clone(), c.clone()),
            &interval(),
        )
        .unwrap()
        .value
        .unwrap();
        let x0 = b.center();
        let (xf, vf) = fgsm(&net, &x0, &c, &b).unwrap();
        let (xp, vp) = pgd(&net, &x0, &c, &b, &PgdConfig::default()).unwrap();
        assert!(b.contains(&xf, 0.0).unwrap() && b.contains(&xp, 0.0).unwrap());
        assert!(vf <= exact + 1e-6 && vp <= exact + 1e-6);
        let full = PgdConfig {
            steps: 1000,
            step_fraction: 1.0,
        };
        let (_, vfull) = pgd(&net, &x0, &c, &b, &full).unwrap();
        assert!(vfull >= vf - 1e-9);
    }
}

#[test]
fn enumeration_dominates_sampling() {
    let mut rng = common::rng(44);
    for _ in 0..10 {
        let net = common::small_net(&mut rng, 10);
        let b = common::random_box(&mut rng, net.input_dim());
        let p = OptimizationProblem::output_max(
            b.clone(),
            common::random_vec(&mut rng, net.output_dim()),
        );
        let v = brute_force_optimize(&net, &p).unwrap().value.unwrap();
        for _ in 0..10_000 {
            let x = common::sample(&mut rng, &b);
            assert!(p.objective_at(&net, &x).unwrap() <= v + 1e-9);
        }
    }
}

#[test]
fn relaxed_milp_is_at_least_as_tight_as_root_lp() {
    let mut rng = common::rng(45);
    for _ in 0..30 {
        let net = common::small_net(&mut rng, 10);
        let b = common::random_box(&mut rng, net.input_dim());
        let p = OptimizationProblem::output_max(
            b.clone(),
            common::random_vec(&mut rng, net.output_dim()),
        );
        let bounds = propagate_interval(&net, &b).unwrap();
        let m = export_milp(&net, &p, &bounds).unwrap();
        let milp_bound = solve_lp(&m.lp).unwrap().objective().unwrap();
        let root = PartialActivationState::from_fixed(&net, &fixed_by_bounds(&bounds));
        let root_bound = solve_lp(&build_relaxed_lp(&net, &root, &bounds, &p).unwrap().0)
            .unwrap()
            .objective()
            .unwrap();
        let exact = brute_force_optimize(&net, &p).unwrap().value.unwrap();
        assert!(
            milp_bound <= root_bound + 1e-6,
            "{milp_bound} > {root_bound}"
        );
        assert!(milp_bound >= exact - 1e-6);
    }
}

#[test]
fn binary_assignments_reproduce_leaf_lps() {
    let mut rng = common::rng(46);
    let mut checked = 0;
    while checked < 10 {
        let net = common::small_net(&mut rng, 6);
        let b = common::random_box(&mut rng, net.input_dim());
        let p = OptimizationProblem::output_max(
            b.clone(),
            common::random_vec(&mut rng, net.output_dim()),
        );
        let bounds = propagate_interval(&net, &b).unwrap();
        let m = export_milp(&net, &p, &bounds).unwrap();
        if m.binaries.is_empty() || m.binaries.len() > 6 {
            continue;
        }
        checked += 1;
        let map = m.map.as_ref().unwrap();
        let root = PartialActivationState::from_fixed(&net, &fixed_by_bounds(&bounds));
        let reparsed = parse_lp_format(&m.to_lp_format()).unwrap();
        assert_eq!(reparsed.lp.names(), m.lp.names());
        for mask in 0..(1usize << m.binaries.len()) {
            let on: Vec<bool> = (0..m.binaries.len()).map(|i| mask >> i & 1 == 1).collect();
            let milp = m.with_binaries(&on).unwrap();
            let mut leaf = root.clone();
            for (&(id, _), &a) in m.binaries.iter().zip(&on) {
                leaf = leaf.with_phase(id, if a { Phase::Active } else { Phase::Inactive });
            }
            let (leaf_lp, _) = build_relaxed_lp(&net, &leaf, &bounds, &p).unwrap();
            for _ in 0..100 {
                // forward pass with some post-activations perturbed
                let x = common::sample(&mut rng, &b);
                let mut trace = net.forward(&x).unwrap();
                for (k, post) in trace.post.iter_mut().enumerate() {
                    for j in 0..post.len() {
                        if rng.gen_bool(0.2) {
                            post[j] += rng.gen_range(-0.3..0.3);
                        }
                    }
                    if k + 1 < net.layers().len() {
                        let next = net.layers()[k + 1].affine(post);
                        trace.pre[k + 1] = next;
                    }
                }
                let a = map.assignment_of(&trace, leaf_lp.num_vars(), 0.0);
                let mut am = a.clone();
                am.resize(m.lp.num_vars(), 0.0);
                for (&(_, col), &v) in m.binaries.iter().zip(&on) {
                    am[col] = if v { 1.0 } else { 0.0 };
                }
                assert_eq!(leaf_lp.is_feasible(&a, 1e-9), milp.is_feasible(&am, 1e-9));
            }
        }
    }
}
