//! Canonical maximization problems shared by the exact and approximate
//! solvers.
//!
//! Every problem is "maximize a linear form over `(x, y, t)`" where `x` is the
//! network input, `y = f(x)` the output, and `t` the optional L∞ epigraph
//! variable measuring the distance from a center point.

use crate::error::{check_dim, Result};
use crate::geometry::{linf_epigraph_dims, EpigraphRow, Hyperrectangle};
use crate::lp::Relation;
use crate::model::{dot, Network};

/// Coefficients over input `x`, output `y` and epigraph `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
}

impl LinearForm {
    pub fn zero(input_dim: usize, output_dim: usize) -> Self {
        Self {
            x: vec![0.0; input_dim],
            y: vec![0.0; output_dim],
            t: 0.0,
        }
    }

    pub fn on_output(input_dim: usize, y: Vec<f64>) -> Self {
        Self {
            x: vec![0.0; input_dim],
            y,
            t: 0.0,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64], t: f64) -> f64 {
        dot(&self.x, x) + dot(&self.y, y) + self.t * t
    }

    pub fn negated(&self) -> Self {
        Self {
            x: self.x.iter().map(|v| -v).collect(),
            y: self.y.iter().map(|v| -v).collect(),
            t: -self.t,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.t == 0.0 && self.x.iter().chain(&self.y).all(|&v| v == 0.0)
    }
}

/// `form relation rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRow {
    pub form: LinearForm,
    pub relation: Relation,
    pub rhs: f64,
}

impl OutputRow {
    pub fn new(form: LinearForm, relation: Relation, rhs: f64) -> Self {
        Self {
            form,
            relation,
            rhs,
        }
    }

    pub fn holds(&self, x: &[f64], y: &[f64], t: f64, tol: f64) -> bool {
        let lhs = self.form.eval(x, y, t);
        match self.relation {
            Relation::Le => lhs <= self.rhs + tol,
            Relation::Ge => lhs >= self.rhs - tol,
            Relation::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }

    /// The closed complement of a `≤` or `≥` row.
    pub fn reversed(&self) -> Self {
        let relation = match self.relation {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        };
        Self::new(self.form.clone(), relation, self.rhs)
    }
}

/// L∞ distance from `center`, measured over `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct Epigraph {
    pub center: Vec<f64>,
    pub dims: Vec<usize>,
}

impl Epigraph {
    pub fn full(center: Vec<f64>) -> Self {
        let dims = (0..center.len()).collect();
        Self { center, dims }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.dims
            .iter()
            .map(|&i| (x[i] - self.center[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<EpigraphRow> {
        linf_epigraph_dims(&self.center, &self.dims).1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    OutputOptimization,
    MinAdversarial,
}

/// Maximize `objective` over `{x ∈ input : rows hold}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub kind: ProblemKind,
    pub input: Hyperrectangle,
    pub objective: LinearForm,
    pub rows: Vec<OutputRow>,
    pub epigraph: Option<Epigraph>,
}

impl OptimizationProblem {
    /// Maximize `cᵀy` over a box.
    pub fn output_max(input: Hyperrectangle, c: Vec<f64>) -> Self {
        let n = input.dim();
        Self {
            kind: ProblemKind::OutputOptimization,
            input,
            objective: LinearForm::on_output(n, c),
            rows: Vec::new(),
            epigraph: None,
        }
    }

    /// Minimize `‖x − center‖∞` (as maximize `−t`) subject to `rows`.
    pub fn min_adversarial(
        input: Hyperrectangle,
        epigraph: Epigraph,
        rows: Vec<OutputRow>,
        output_dim: usize,
    ) -> Self {
        let n = input.dim();
        let mut objective = LinearForm::zero(n, output_dim);
        objective.t = -1.0;
        Self {
            kind: ProblemKind::MinAdversarial,
            input,
            objective,
            rows,
            epigraph: Some(epigraph),
        }
    }

    pub fn with_rows(mut self, rows: Vec<OutputRow>) -> Self {
        self.rows = rows;
        self
    }

    /// Same constraints, zero objective.
    pub fn feasibility(&self) -> Self {
        let mut p = self.clone();
        p.objective = LinearForm::zero(self.objective.x.len(), self.objective.y.len());
        p
    }

    pub fn check_dims(&self, net: &Network) -> Result<()> {
        let (n, m) = (net.input_dim(), net.output_dim());
        check_dim("input box", n, self.input.dim())?;
        check_dim("objective x", n, self.objective.x.len())?;
        check_dim("objective y", m, self.objective.y.len())?;
        for row in &self.rows {
            check_dim("row x", n, row.form.x.len())?;
            check_dim("row y", m, row.form.y.len())?;
        }
        if let Some(e) = &self.epigraph {
            check_dim("epigraph center", n, e.center.len())?;
        }
        Ok(())
    }

    /// Value of `t` implied by `x`: the epigraph distance, or 0 without one.
    pub fn t_at(&self, x: &[f64]) -> f64 {
        self.epigraph.as_ref().map_or(0.0, |e| e.distance(x))
    }

    pub fn objective_at(&self, net: &Network, x: &[f64]) -> Result<f64> {
        let y = net.evaluate(x)?;
        Ok(self.objective.eval(x, &y, self.t_at(x)))
    }

    /// Whether `x` lies in the input box and satisfies every row.
    pub fn is_feasible(&self, net: &Network, x: &[f64], tol: f64) -> Result<bool> {
        if !self.input.contains(x, tol)? {
            return Ok(false);
        }
        let y = net.evaluate(x)?;
        let t = self.t_at(x);
        Ok(self.rows.iter().all(|r| r.holds(x, &y, t, tol)))
    }

    pub fn has_output_rows(&self) -> bool {
        !self.rows.is_empty()
    }
}
