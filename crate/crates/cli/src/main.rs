use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use reluopt::baselines::export_milp;
use reluopt::search::compute_bounds;
use reluopt_cli::bench::{
    effective_timeout, load_dir, load_problem, run_benchmark, run_solver, search_config,
    write_benchmark,
};
use reluopt_cli::{canonicalize, generate_queries, write_queries, Family, SolverKind};

#[derive(Parser)]
#[command(
    name = "reluopt",
    version,
    about = "Exact optimization over ReLU networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem file.
    Solve {
        spec: PathBuf,
        /// Overrides the solver named in the file.
        #[arg(long)]
        solver: Option<String>,
        /// Seconds.
        #[arg(long)]
        timeout: Option<f64>,
        /// Write one JSON line per search node to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write a family of seeded queries.
    Generate {
        /// acas-out, acas-in, taxi-out or mnist-in.
        family: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// ReLUs per network, at most 64.
        #[arg(long, default_value_t = 16)]
        scale: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run solvers over every problem file in a directory.
    Bench {
        dir: PathBuf,
        /// Comma-separated solver names.
        #[arg(long, default_value = "branch-bound")]
        solvers: String,
        /// Seconds per problem and solver.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write the big-M MILP of a problem in LP format.
    ExportMilp {
        spec: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn solver_named(name: &str) -> anyhow::Result<SolverKind> {
    SolverKind::from_name(name.trim()).ok_or_else(|| anyhow!("unknown solver `{name}`"))
}

fn solve(
    path: &Path,
    solver: Option<String>,
    timeout: Option<f64>,
    trace: Option<PathBuf>,
) -> anyhow::Result<()> {
    let loaded = load_problem(path);
    let (spec, net) = loaded.problem.map_err(|e| anyhow!(e))?;
    let solver = solver
        .map(|s| solver_named(&s))
        .transpose()?
        .unwrap_or(spec.solver);
    if solver == SolverKind::MilpExport {
        bail!("use the export-milp command for milp-export");
    }
    let timeout = effective_timeout(&spec, timeout.map(Duration::from_secs_f64));
    let mut trace_file = trace
        .map(|p| {
            File::create(&p)
                .map(BufWriter::new)
                .with_context(|| p.display().to_string())
        })
        .transpose()?;
    let record = run_solver(
        &loaded.id,
        &spec,
        &net,
        solver,
        timeout,
        trace_file.as_mut().map(|w| w as &mut dyn Write),
    );
    if let Some(mut w) = trace_file {
        w.flush()?;
    }
    println!("status: {}", record.status.name());
    if let Some(v) = record.value {
        println!("value: {v:?}");
    }
    if let Some(x) = &record.argopt {
        println!("argopt: {x:?}");
    }
    println!(
        "nodes: {}  lps: {}  wall_s: {:.3}",
        record.nodes, record.lps, record.wall_s
    );
    if let Some(m) = record.message {
        bail!(m);
    }
    Ok(())
}

fn export(path: &Path, out: &Path) -> anyhow::Result<()> {
    let (spec, net) = load_problem(path).problem.map_err(|e| anyhow!(e))?;
    let canonical = canonicalize(&spec, &net)?;
    let [problem] = canonical.problems.as_slice() else {
        bail!("untargeted queries expand to several models; export them one label at a time");
    };
    let config = search_config(&spec.config, effective_timeout(&spec, None));
    let bounds = compute_bounds(&net, &problem.input, config.preprocess)?;
    let model = export_milp(&net, problem, &bounds)?;
    fs::write(out, model.to_lp_format())?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Solve {
            spec,
            solver,
            timeout,
            trace,
        } => solve(&spec, solver, timeout, trace),
        Command::Generate {
            family,
            seed,
            count,
            scale,
            out,
        } => {
            let family =
                Family::from_name(&family).ok_or_else(|| anyhow!("unknown family `{family}`"))?;
            let paths = write_queries(&out, &generate_queries(family, seed, count, scale))?;
            println!("wrote {} problems to {}", paths.len(), out.display());
            Ok(())
        }
        Command::Bench {
            dir,
            solvers,
            timeout,
            out,
        } => {
            let solvers = solvers
                .split(',')
                .map(solver_named)
                .collect::<anyhow::Result<Vec<_>>>()?;
            let problems = load_dir(&dir)?;
            let output = run_benchmark(&problems, &solvers, timeout.map(Duration::from_secs_f64));
            write_benchmark(&out, &output)?;
            print!("{}", output.summary);
            Ok(())
        }
        Command::ExportMilp { spec, out } => export(&spec, &out),
    }
}
