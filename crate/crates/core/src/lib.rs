//! Exact global optimization of linear functions of feed-forward ReLU
//! networks by branch and bound over activation states, with LP relaxation
//! bounds, plus reference solvers to compare against.

pub mod baselines;
pub mod bounds;
pub mod error;
pub mod geometry;
pub mod lp;
pub mod model;
pub mod problem;
pub mod search;

pub use error::{Error, Result};
pub use geometry::Hyperrectangle;
pub use model::{Network, NodeId};
pub use problem::OptimizationProblem;
pub use search::{optimize, SearchConfig, SearchResult, SearchStatus};
