//! Reference solvers: bisection over a decision procedure, exhaustive
//! activation enumeration, gradient attacks, and big-M MILP export.

mod attacks;
mod bisection;
mod brute_force;
mod milp;

pub use attacks::{fgsm, pgd, PgdConfig};
pub use bisection::{
    bisection_optimize, verify_decision, BisectionConfig, BracketPolicy, Decision,
};
pub use brute_force::{brute_force_optimize, ENUMERATION_LIMIT};
pub use milp::{export_milp, parse_lp_format, write_lp_format, MilpModel};
