//! Seeded query families on small random networks.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reluopt::model::{random_network, write_nnet};
use reluopt::Network;

use crate::spec::{ConfigOverrides, DirectionName, ProblemSpec, SolverKind, SpecKind, Target};

/// Radii of the output-optimization queries around taxiing images, cycled
/// in this order.
pub const TAXI_RADII: [f64; 3] = [0.04, 0.08, 0.016];

/// Radius of the classification queries.
pub const MNIST_RADIUS: f64 = 0.05;

/// Total ReLU budget of any generated network.
pub const MAX_RELUS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Maximize `y_real − y_adv` over a box, five inputs and outputs.
    AcasStyleOut,
    /// Smallest single-input perturbation flipping the advisory; five
    /// queries per network, one per input dimension.
    AcasStyleIn,
    /// Extreme outputs of a regression net over small L∞ balls.
    TaxiStyleOut,
    /// Smallest L∞ perturbation reaching a target class.
    MnistStyleIn,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::AcasStyleOut,
        Family::AcasStyleIn,
        Family::TaxiStyleOut,
        Family::MnistStyleIn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::AcasStyleOut => "acas-out",
            Family::AcasStyleIn => "acas-in",
            Family::TaxiStyleOut => "taxi-out",
            Family::MnistStyleIn => "mnist-in",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    fn io(self) -> (usize, usize) {
        match self {
            Family::AcasStyleOut | Family::AcasStyleIn => (5, 5),
            Family::TaxiStyleOut => (4, 2),
            Family::MnistStyleIn => (6, 3),
        }
    }
}

/// A generated problem together with the network it refers to.
#[derive(Debug, Clone)]
pub struct Query {
    pub id: String,
    pub spec: ProblemSpec,
    pub network: Network,
}

/// Hidden widths for `relus` ReLUs: two equal-ish layers when there is
/// room, otherwise one.
fn hidden_widths(relus: usize) -> Vec<usize> {
    if relus >= 8 {
        vec![relus - relus / 2, relus / 2]
    } else {
        vec![relus.max(1)]
    }
}

fn network(rng: &mut ChaCha8Rng, family: Family, relus: usize) -> Network {
    let (n, m) = family.io();
    let mut dims = vec![n];
    dims.extend(hidden_widths(relus));
    dims.push(m);
    random_network(rng, &dims).expect("generated shapes are valid")
}

fn argmax(y: &[f64]) -> usize {
    (0..y.len())
        .max_by(|&a, &b| y[a].total_cmp(&y[b]).then(b.cmp(&a)))
        .unwrap_or(0)
}

/// `count` queries of `family` on networks with `scale` ReLUs (clamped to
/// `1..=64`). Equal seeds give equal queries.
pub fn generate_queries(family: Family, seed: u64, count: usize, scale: usize) -> Vec<Query> {
    let relus = scale.clamp(1, MAX_RELUS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((family as u64) << 56));
    let (n, m) = family.io();
    let mut out = Vec::with_capacity(count);
    let mut shared: Option<(Network, Vec<f64>, usize, usize)> = None;
    for i in 0..count {
        let id = format!("{}-{seed}-{i:03}", family.name());
        let spec_for = |network: PathBuf, kind: SpecKind| ProblemSpec {
            network,
            solver: SolverKind::BranchBound,
            kind,
            config: ConfigOverrides::default(),
        };
        let query = match family {
            Family::AcasStyleOut => {
                let net = network(&mut rng, family, relus);
                let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
                let radius: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.3)).collect();
                let mut labels: Vec<usize> = (0..m).collect();
                labels.shuffle(&mut rng);
                let mut c = vec![0.0; m];
                c[labels[0]] = 1.0;
                c[labels[1]] = -1.0;
                let kind = SpecKind::OutputOptimization {
                    objective: c,
                    direction: DirectionName::Maximize,
                    lower: center.iter().zip(&radius).map(|(c, r)| c - r).collect(),
                    upper: center.iter().zip(&radius).map(|(c, r)| c + r).collect(),
                    rows: vec![],
                };
                Query {
                    spec: spec_for(format!("{id}.nnet").into(), kind),
                    id,
                    network: net,
                }
            }
            Family::AcasStyleIn => {
                let k = i % n;
                if k == 0 {
                    let net = network(&mut rng, family, relus);
                    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
                    let y0 = net.evaluate(&x0).expect("dimensions match");
                    let advisory = argmax(&y0);
                    let other = (advisory + rng.gen_range(1..m)) % m;
                    shared = Some((net, x0, advisory, other));
                }
                let (net, x0, advisory, other) = shared.clone().expect("set at k = 0");
                let net_file = format!("{}-{seed}-net{:03}.nnet", family.name(), i / n);
                let kind = SpecKind::MinAdversarialLinf {
                    x0,
                    radius: 1.0,
                    dims: Some(vec![k]),
                    domain: None,
                    target: Target::Label {
                        label: other,
                        versus: vec![advisory],
                        margin: 0.0,
                    },
                };
                Query {
                    spec: spec_for(net_file.into(), kind),
                    id,
                    network: net,
                }
            }
            Family::TaxiStyleOut => {
                let net = network(&mut rng, family, relus);
                let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..0.9)).collect();
                let r = TAXI_RADII[i % TAXI_RADII.len()];
                let mut c = vec![0.0; m];
                c[rng.gen_range(0..m)] = 1.0;
                let direction = if rng.gen_bool(0.5) {
                    DirectionName::Maximize
                } else {
                    DirectionName::Minimize
                };
                let kind = SpecKind::OutputOptimization {
                    objective: c,
                    direction,
                    lower: x0.iter().map(|x| x - r).collect(),
                    upper: x0.iter().map(|x| x + r).collect(),
                    rows: vec![],
                };
                Query {
                    spec: spec_for(format!("{id}.nnet").into(), kind),
                    id,
                    network: net,
                }
            }
            Family::MnistStyleIn => {
                let net = network(&mut rng, family, relus);
                let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let y0 = net.evaluate(&x0).expect("dimensions match");
                let truth = argmax(&y0);
                let target = (truth + rng.gen_range(1..m)) % m;
                let kind = SpecKind::MinAdversarialLinf {
                    x0,
                    radius: MNIST_RADIUS,
                    dims: None,
                    domain: Some((vec![0.0; n], vec![1.0; n])),
                    target: Target::Label {
                        label: target,
                        versus: vec![truth],
                        margin: 0.0,
                    },
                };
                Query {
                    spec: spec_for(format!("{id}.nnet").into(), kind),
                    id,
                    network: net,
                }
            }
        };
        out.push(query);
    }
    out
}

/// Writes every query as `<id>.toml` plus its network file into `dir`.
pub fn write_queries(dir: &Path, queries: &[Query]) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(queries.len());
    for q in queries {
        let net_path = dir.join(&q.spec.network);
        if !net_path.exists() {
            fs::write(&net_path, write_nnet(&q.network)?)?;
        }
        let path = dir.join(format!("{}.toml", q.id));
        fs::write(&path, crate::spec::write_problem(&q.spec))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_problem;

    #[test]
    fn taxi_radii_cycle() {
        let qs = generate_queries(Family::TaxiStyleOut, 3, 6, 8);
        let radii: Vec<f64> = qs
            .iter()
            .map(|q| match &q.spec.kind {
                SpecKind::OutputOptimization { lower, upper, .. } => (upper[0] - lower[0]) / 2.0,
                _ => unreachable!(),
            })
            .collect();
        for (i, r) in radii.iter().enumerate() {
            assert!((r - TAXI_RADII[i % 3]).abs() < 1e-12);
        }
    }

    #[test]
    fn mnist_radius() {
        for q in generate_queries(Family::MnistStyleIn, 1, 4, 8) {
            match q.spec.kind {
                SpecKind::MinAdversarialLinf { radius, .. } => assert_eq!(radius, MNIST_RADIUS),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn acas_in_uses_each_input_dimension_once_per_network() {
        let qs = generate_queries(Family::AcasStyleIn, 2, 10, 8);
        for (i, q) in qs.iter().enumerate() {
            match &q.spec.kind {
                SpecKind::MinAdversarialLinf { dims, .. } => {
                    assert_eq!(dims.as_deref(), Some(&[i % 5][..]))
                }
                _ => unreachable!(),
            }
        }
        assert_eq!(qs[0].spec.network, qs[4].spec.network);
        assert_ne!(qs[0].spec.network, qs[5].spec.network);
    }

    #[test]
    fn relu_budget_is_respected() {
        for f in Family::ALL {
            for q in generate_queries(f, 0, 2, 1000) {
                assert!(q.network.relu_count() <= MAX_RELUS);
            }
        }
    }

    #[test]
    fn same_seed_writes_identical_files() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for f in Family::ALL {
            write_queries(a.path(), &generate_queries(f, 9, 5, 10)).unwrap();
            write_queries(b.path(), &generate_queries(f, 9, 5, 10)).unwrap();
        }
        let mut names: Vec<_> = fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            let x = fs::read(a.path().join(&name)).unwrap();
            let y = fs::read(b.path().join(&name)).unwrap();
            assert_eq!(x, y, "{name:?}");
            if name.to_string_lossy().ends_with(".toml") {
                let spec = parse_problem(std::str::from_utf8(&x).unwrap()).unwrap();
                assert_eq!(crate::spec::write_problem(&spec).as_bytes(), &x[..]);
            }
        }
    }
}
