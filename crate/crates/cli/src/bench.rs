//! Running solvers on problem specs and tabulating the results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use reluopt::baselines::{
    bisection_optimize, brute_force_optimize, fgsm, pgd, BisectionConfig, BracketPolicy, PgdConfig,
};
use reluopt::model::load_nnet;
use reluopt::search::{
    optimize_traced, NodeOrder, Preprocess, SearchConfig, SearchResult, SearchStatus,
    SplitStrategy, WarmStart,
};
use reluopt::{Error, Network, OptimizationProblem};

use crate::canonical::{canonicalize, Canonical};
use crate::spec::{
    parse_problem, ConfigOverrides, OrderName, PreprocessName, ProblemSpec, SolverKind, SplitName,
    WarmStartName,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

pub const CSV_HEADER: &str = "problem_id,solver,status,value,wall_s,nodes,lps,argopt_path";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordStatus {
    Optimal,
    Infeasible,
    Timeout,
    Error,
}

impl RecordStatus {
    pub fn name(self) -> &'static str {
        match self {
            RecordStatus::Optimal => "Optimal",
            RecordStatus::Infeasible => "Infeasible",
            RecordStatus::Timeout => "Timeout",
            RecordStatus::Error => "Error",
        }
    }

    pub fn is_solved(self) -> bool {
        matches!(self, RecordStatus::Optimal | RecordStatus::Infeasible)
    }
}

/// One (problem, solver) run.
///
/// For the approximate solvers `Optimal` means the attack completed; its
/// value is a lower bound, not a certified optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub problem_id: String,
    pub solver: SolverKind,
    pub status: RecordStatus,
    /// Value in the spec's terms: the objective in its own direction, or
    /// the perturbation distance.
    pub value: Option<f64>,
    /// The same value as a maximization.
    pub canonical: Option<f64>,
    pub argopt: Option<Vec<f64>>,
    pub wall_s: f64,
    pub nodes: usize,
    pub lps: usize,
    pub message: Option<String>,
}

impl ResultRecord {
    fn error(problem_id: &str, solver: SolverKind, message: String, wall_s: f64) -> Self {
        Self {
            problem_id: problem_id.to_string(),
            solver,
            status: RecordStatus::Error,
            value: None,
            canonical: None,
            argopt: None,
            wall_s,
            nodes: 0,
            lps: 0,
            message: Some(message),
        }
    }

    /// Path of the argopt file relative to the output directory.
    pub fn argopt_path(&self) -> Option<String> {
        self.argopt
            .as_ref()
            .map(|_| format!("argopt/{}.{}.txt", self.problem_id, self.solver.name()))
    }
}

pub fn search_config(o: &ConfigOverrides, timeout: Duration) -> SearchConfig {
    let d = SearchConfig::default();
    let per_query = o
        .per_query_timeout
        .map(Duration::from_secs_f64)
        .unwrap_or(Duration::from_secs(1));
    SearchConfig {
        split: match o.split {
            Some(SplitName::EarliestUnfixed) => SplitStrategy::EarliestUnfixed,
            Some(SplitName::LargestViolation) => SplitStrategy::LargestViolation,
            None => d.split,
        },
        order: match o.order {
            Some(OrderName::BestFirst) => NodeOrder::BestFirst,
            Some(OrderName::DepthFirst) => NodeOrder::DepthFirst,
            None => d.order,
        },
        warm_start: match o.warm_start {
            Some(WarmStartName::Pgd) => WarmStart::Pgd,
            Some(WarmStartName::None) => WarmStart::None,
            None => d.warm_start,
        },
        preprocess: match o.preprocess {
            Some(PreprocessName::Interval) => Preprocess::Interval,
            _ => Preprocess::LpTightening {
                per_query_timeout: per_query,
            },
        },
        timeout,
        ..d
    }
}

pub fn pgd_config(o: &ConfigOverrides) -> PgdConfig {
    let d = PgdConfig::default();
    PgdConfig {
        steps: o.pgd_steps.unwrap_or(d.steps),
        step_fraction: o.pgd_step_fraction.unwrap_or(d.step_fraction),
    }
}

/// Per-run timeout: the explicit one, else the spec's, else the default.
pub fn effective_timeout(spec: &ProblemSpec, global: Option<Duration>) -> Duration {
    global
        .or(spec.config.timeout.map(Duration::from_secs_f64))
        .unwrap_or(DEFAULT_TIMEOUT)
}

struct Combined {
    status: RecordStatus,
    canonical: Option<f64>,
    argopt: Option<Vec<f64>>,
    nodes: usize,
    lps: usize,
}

/// Best over subproblems: any timeout makes the whole run a timeout.
fn combine(results: &[SearchResult]) -> Combined {
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut timed_out = false;
    let (mut nodes, mut lps) = (0, 0);
    for r in results {
        nodes += r.stats.nodes;
        lps += r.stats.lps;
        timed_out |= r.status == SearchStatus::Timeout;
        if let (Some(v), Some(x)) = (r.value, &r.argopt) {
            if best.as_ref().map_or(true, |(b, _)| v > *b) {
                best = Some((v, x.clone()));
            }
        }
    }
    let status = if timed_out {
        RecordStatus::Timeout
    } else if best.is_some() {
        RecordStatus::Optimal
    } else {
        RecordStatus::Infeasible
    };
    let (canonical, argopt) = match best {
        Some((v, x)) => (Some(v), Some(x)),
        None => (None, None),
    };
    Combined {
        status,
        canonical,
        argopt,
        nodes,
        lps,
    }
}

fn attack_target(c: &Canonical) -> Option<(&OptimizationProblem, Vec<f64>)> {
    let [p] = c.problems.as_slice() else {
        return None;
    };
    let plain = p.rows.is_empty()
        && p.epigraph.is_none()
        && p.objective.t == 0.0
        && p.objective.x.iter().all(|&v| v == 0.0);
    plain.then(|| (p, p.objective.y.clone()))
}

fn solve_canonical(
    net: &Network,
    spec: &ProblemSpec,
    canonical: &Canonical,
    solver: SolverKind,
    timeout: Duration,
    mut trace: Option<&mut dyn std::io::Write>,
) -> Result<Combined, Error> {
    let start = Instant::now();
    let remaining = || timeout.saturating_sub(start.elapsed());
    match solver {
        SolverKind::BranchBound | SolverKind::Bisection | SolverKind::BruteForce => {
            let mut results = Vec::new();
            for p in &canonical.problems {
                let r = match solver {
                    SolverKind::BranchBound => {
                        let cfg = search_config(&spec.config, remaining());
                        let t = trace.as_mut().map(|w| &mut **w as &mut dyn std::io::Write);
                        optimize_traced(net, p, &cfg, t)?
                    }
                    SolverKind::Bisection => {
                        let cfg = BisectionConfig {
                            gap: spec.config.gap.unwrap_or(1e-4),
                            bracket: BracketPolicy::Doubling,
                            search: search_config(&spec.config, remaining()),
                            timeout: remaining(),
                        };
                        bisection_optimize(net, p, &cfg)?
                    }
                    _ => brute_force_optimize(net, p)?,
                };
                results.push(r);
            }
            Ok(combine(&results))
        }
        SolverKind::Fgsm | SolverKind::Pgd => {
            let (p, c) = attack_target(canonical).ok_or_else(|| {
                Error::Unsupported(format!(
                    "{} needs a box-only output optimization problem",
                    solver.name()
                ))
            })?;
            let x0 = p.input.center();
            let (x, v) = if solver == SolverKind::Fgsm {
                fgsm(net, &x0, &c, &p.input)?
            } else {
                pgd(net, &x0, &c, &p.input, &pgd_config(&spec.config))?
            };
            Ok(Combined {
                status: RecordStatus::Optimal,
                canonical: Some(v),
                argopt: Some(x),
                nodes: 0,
                lps: 0,
            })
        }
        SolverKind::MilpExport => Err(Error::Unsupported(
            "milp-export produces a model, not a result".into(),
        )),
    }
}

/// Runs one solver on one problem; failures become `Error` records.
pub fn run_solver(
    problem_id: &str,
    spec: &ProblemSpec,
    net: &Network,
    solver: SolverKind,
    timeout: Duration,
    trace: Option<&mut dyn std::io::Write>,
) -> ResultRecord {
    let start = Instant::now();
    let outcome = canonicalize(spec, net)
        .and_then(|c| solve_canonical(net, spec, &c, solver, timeout, trace).map(|r| (c, r)));
    let wall_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok((c, r)) => ResultRecord {
            problem_id: problem_id.to_string(),
            solver,
            status: r.status,
            value: r.canonical.map(|v| c.report.reported(v)),
            canonical: r.canonical,
            argopt: r.argopt,
            wall_s,
            nodes: r.nodes,
            lps: r.lps,
            message: None,
        },
        Err(e) => ResultRecord::error(problem_id, solver, e.to_string(), wall_s),
    }
}

/// A problem file with its network, or the reason it could not be loaded.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub id: String,
    pub problem: Result<(ProblemSpec, Network), String>,
}

/// Reads a problem file and the network it names (relative to the file).
pub fn load_problem(path: &Path) -> LoadedProblem {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let problem = (|| {
        let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
        let spec = parse_problem(&text).map_err(|e| e.to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        let net = load_nnet(base.join(&spec.network)).map_err(|e| e.to_string())?;
        Ok((spec, net))
    })();
    LoadedProblem { id, problem }
}

/// Every `*.toml` problem in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> anyhow::Result<Vec<LoadedProblem>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    Ok(paths.iter().map(|p| load_problem(p)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    /// Sorted by problem id, then solver.
    pub records: Vec<ResultRecord>,
    pub csv: String,
    pub summary: String,
    pub scatter: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Runs every solver on every problem, one job at a time.
pub fn run_benchmark(
    problems: &[LoadedProblem],
    solvers: &[SolverKind],
    timeout: Option<Duration>,
) -> BenchOutput {
    let mut records = Vec::new();
    for p in problems {
        for &solver in solvers {
            let record = match &p.problem {
                Ok((spec, net)) => {
                    let t = effective_timeout(spec, timeout);
                    log::info!("{} / {}", p.id, solver.name());
                    run_solver(&p.id, spec, net, solver, t, None)
                }
                Err(msg) => ResultRecord::error(&p.id, solver, msg.clone(), 0.0),
            };
            records.push(record);
        }
    }
    records.sort_by(|a, b| {
        a.problem_id
            .cmp(&b.problem_id)
            .then(a.solver.cmp(&b.solver))
    });
    let csv = results_csv(&records);
    let summary = summary_csv(&records, solvers);
    let scatter = scatter_csv(&records);
    BenchOutput {
        records,
        csv,
        summary,
        scatter,
    }
}

pub fn results_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{},{},{}",
            r.problem_id,
            r.solver.name(),
            r.status.name(),
            fmt_opt(r.value),
            r.wall_s,
            r.nodes,
            r.lps,
            r.argopt_path().unwrap_or_default()
        );
    }
    out
}

/// Per solver: number of solved problems and their total time.
pub fn summary_csv(records: &[ResultRecord], solvers: &[SolverKind]) -> String {
    let mut solvers = solvers.to_vec();
    solvers.sort();
    solvers.dedup();
    let mut out = String::from("solver,solved,total_s\n");
    for s in solvers {
        let solved: Vec<&ResultRecord> = records
            .iter()
            .filter(|r| r.solver == s && r.status.is_solved())
            .collect();
        let total: f64 = solved.iter().map(|r| r.wall_s).sum();
        let _ = writeln!(out, "{},{},{:.6}", s.name(), solved.len(), total);
    }
    out
}

/// Exact against approximate values, both as maximizations.
pub fn scatter_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from("problem_id,solver,exact,approximate\n");
    let exact_of = |id: &str| {
        [
            SolverKind::BranchBound,
            SolverKind::BruteForce,
            SolverKind::Bisection,
        ]
        .into_iter()
        .find_map(|s| {
            records
                .iter()
                .find(|r| r.problem_id == id && r.solver == s && r.status == RecordStatus::Optimal)
                .and_then(|r| r.canonical)
        })
    };
    for r in records {
        if !r.solver.is_approximate() || r.status != RecordStatus::Optimal {
            continue;
        }
        if let (Some(exact), Some(approx)) = (exact_of(&r.problem_id), r.canonical) {
            let _ = writeln!(
                out,
                "{},{},{:?},{:?}",
                r.problem_id,
                r.solver.name(),
                exact,
                approx
            );
        }
    }
    out
}

/// Writes `results.csv`, `summary.csv`, `scatter.csv` and the argopt files.
pub fn write_benchmark(dir: &Path, output: &BenchOutput) -> anyhow::Result<()> {
    fs::create_dir_all(dir.join("argopt"))?;
    fs::write(dir.join("results.csv"), &output.csv)?;
    fs::write(dir.join("summary.csv"), &output.summary)?;
    fs::write(dir.join("scatter.csv"), &output.scatter)?;
    for r in &output.records {
        if let (Some(path), Some(x)) = (r.argopt_path(), &r.argopt) {
            let text: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            fs::write(dir.join(path), text.join("\n") + "\n")?;
        }
    }
    Ok(())
}

/// Drops the `wall_s` column, the only one allowed to differ between runs.
pub fn without_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let mut cols: Vec<&str> = line.split(',').collect();
            if cols.len() > 4 {
                cols.remove(4);
            }
            cols.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{DirectionName, SpecKind};
    use reluopt::model::{Activation, Layer, Matrix};

    fn relu_net() -> Network {
        Network::new(vec![
            Layer::new(Matrix::identity(1), vec![0.0], Activation::Relu).unwrap(),
            Layer::new(Matrix::identity(1), vec![0.0], Activation::Identity).unwrap(),
        ])
        .unwrap()
    }

    fn trivial() -> LoadedProblem {
        let spec = ProblemSpec {
            network: "n.nnet".into(),
            solver: SolverKind::BranchBound,
            kind: SpecKind::OutputOptimization {
                objective: vec![1.0],
                direction: DirectionName::Maximize,
                lower: vec![-1.0],
                upper: vec![2.0],
                rows: vec![],
            },
            config: ConfigOverrides::default(),
        };
        LoadedProblem {
            id: "trivial".into(),
            problem: Ok((spec, relu_net())),
        }
    }

    #[test]
    fn empty_run_has_header_only() {
        let out = run_benchmark(&[], &[SolverKind::BranchBound], None);
        assert_eq!(out.csv, format!("{CSV_HEADER}\n"));
        assert!(out.records.is_empty());
    }

    #[test]
    fn two_solvers_agree_on_trivial_problem() {
        let out = run_benchmark(
            &[trivial()],
            &[SolverKind::Bisection, SolverKind::BranchBound],
            None,
        );
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].solver, SolverKind::BranchBound);
        for r in &out.records {
            assert_eq!(r.status, RecordStatus::Optimal);
            assert!((r.value.unwrap() - 2.0).abs() <= 1e-4);
        }
    }

    #[test]
    fn approximate_solvers_feed_the_scatter() {
        let out = run_benchmark(
            &[trivial()],
            &[SolverKind::BranchBound, SolverKind::Fgsm, SolverKind::Pgd],
            None,
        );
        let rows: Vec<&str> = out.scatter.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        for row in rows {
            let cols: Vec<f64> = row.split(',').skip(2).map(|c| c.parse().unwrap()).collect();
            assert!(cols[1] <= cols[0] + 1e-6);
        }
    }

    #[test]
    fn unloadable_problem_is_an_error_record() {
        let bad = LoadedProblem {
            id: "bad".into(),
            problem: Err("no such file".into()),
        };
        let out = run_benchmark(&[bad, trivial()], &[SolverKind::BranchBound], None);
        assert_eq!(out.records[0].status, RecordStatus::Error);
        assert_eq!(out.records[1].status, RecordStatus::Optimal);
        assert!(out.summary.contains("branch-bound,1,"));
    }

    #[test]
    fn wall_time_column_is_dropped() {
        assert_eq!(without_wall_time("a,b,c,d,1.5,e\n"), "a,b,c,d,e");
    }
}
