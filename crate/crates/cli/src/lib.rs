//! Problem files, query generators and the benchmark harness around the
//! `reluopt` solvers.

pub mod bench;
pub mod canonical;
pub mod generate;
pub mod spec;

pub use bench::{run_benchmark, run_solver, BenchOutput, RecordStatus, ResultRecord};
pub use canonical::{canonicalize, Canonical, Report};
pub use generate::{generate_queries, write_queries, Family, Query};
pub use spec::{parse_problem, write_problem, ProblemSpec, SchemaError, SolverKind};
