//! Linear programs, a dense bounded-variable simplex solver, and the relaxed
//! LP that bounds the objective over a partial activation state.

mod relaxation;
mod simplex;

pub(crate) use relaxation::encode_network;
pub use relaxation::{build_relaxed_lp, check_relu_consistency, NodeValues, VariableIndexMap};
pub use simplex::{solve_lp, solve_lp_with, SolverOptions};

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Direction;

/// Absolute per-row and per-bound feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// `Σ coefficient·x[var] relation rhs`, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefficients: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coefficients: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self {
            coefficients,
            relation,
            rhs,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
    direction: Direction,
}

impl Default for LinearProgram {
    fn default() -> Self {
        Self::new(Direction::Maximize)
    }
}

impl LinearProgram {
    pub fn new(direction: Direction) -> Self {
        Self {
            names: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            direction,
        }
    }

    /// Adds a column with bounds `[lower, upper]` (infinite values allowed)
    /// and zero objective coefficient.
    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.push(0.0);
        self.names.len() - 1
    }

    pub fn add_constraint(&mut self, constraint: Constraint) -> Result<()> {
        if !constraint.rhs.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "constraint rhs {} is not finite",
                constraint.rhs
            )));
        }
        for &(j, a) in &constraint.coefficients {
            if j >= self.num_vars() {
                return Err(Error::DimensionMismatch {
                    what: "constraint column",
                    expected: self.num_vars(),
                    found: j,
                });
            }
            if !a.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "coefficient {a} of column {j} is not finite"
                )));
            }
        }
        self.constraints.push(constraint);
        Ok(())
    }

    pub fn set_objective(&mut self, var: usize, coefficient: f64) {
        self.objective[var] = coefficient;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_direction(&mut self, direction: Direction) {
        self.direction = direction;
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.num_vars() && self.max_violation(x) <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal {
        objective: f64,
        assignment: Vec<f64>,
    },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpResult {
    pub fn status(&self) -> LpStatus {
        match self {
            LpResult::Optimal { .. } => LpStatus::Optimal,
            LpResult::Infeasible => LpStatus::Infeasible,
            LpResult::Unbounded => LpStatus::Unbounded,
        }
    }

    pub fn objective(&self) -> Option<f64> {
        match self {
            LpResult::Optimal { objective, .. } => Some(*objective),
            _ => None,
        }
    }

    pub fn assignment(&self) -> Option<&[f64]> {
        match self {
            LpResult::Optimal { assignment, .. } => Some(assignment),
            _ => None,
        }
    }
}
