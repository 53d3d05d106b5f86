//! Dense bounded-variable primal simplex.
//!
//! Every row `aᵢ·x rel bᵢ` gets a logical column `sᵢ` so that
//! `aᵢ·x + sᵢ = bᵢ`, with `sᵢ ∈ [0, ∞)` for `≤`, `(−∞, 0]` for `≥` and
//! `[0, 0]` for `=`. Rows whose logical cannot absorb the starting residual
//! receive an artificial column; phase one drives the artificials to zero,
//! phase two optimizes the real objective. Pricing is Dantzig's rule, with a
//! permanent switch to Bland's rule once a phase sees `2·(rows + cols)`
//! consecutive degenerate pivots.

use std::time::Instant;

use super::{LinearProgram, LpResult, Relation, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::geometry::Direction;

const PIVOT_TOL: f64 = 1e-9;
const OPTIMALITY_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const REFACTOR_EVERY: usize = 64;
const NONBASIC: usize = usize::MAX;

#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    /// Abort with [`Error::DeadlineExceeded`] once this instant has passed.
    pub deadline: Option<Instant>,
    /// Overrides the default iteration cap.
    pub max_iterations: Option<usize>,
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpResult> {
    solve_lp_with(lp, &SolverOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, options: &SolverOptions) -> Result<LpResult> {
    for j in 0..lp.num_vars() {
        if lp.lower()[j] > lp.upper()[j] {
            return Ok(LpResult::Infeasible);
        }
    }
    let mut tableau = Tableau::new(lp);
    let cap = options
        .max_iterations
        .unwrap_or(100 * (tableau.m + tableau.ncols) + 1000);
    let mut runner = Runner {
        deadline: options.deadline,
        iterations_left: cap,
    };

    if tableau.num_artificial > 0 {
        let mut phase_one = vec![0.0; tableau.ncols];
        for c in &mut phase_one[tableau.first_artificial..] {
            *c = 1.0;
        }
        match tableau.run_phase(&phase_one, &mut runner)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return Err(Error::NumericalFailure(
                    "phase one reported an unbounded direction".into(),
                ))
            }
        }
        let infeasibility: f64 = tableau.x[tableau.first_artificial..].iter().sum();
        if infeasibility > 1e-7 * tableau.scale {
            return Ok(LpResult::Infeasible);
        }
        tableau.retire_artificials()?;
    }

    let sign = match lp.direction() {
        Direction::Maximize => -1.0,
        Direction::Minimize => 1.0,
    };
    let mut cost = vec![0.0; tableau.ncols];
    for (c, &o) in cost.iter_mut().zip(lp.objective()) {
        *c = sign * o;
    }
    match tableau.run_phase(&cost, &mut runner)? {
        PhaseEnd::Unbounded => Ok(LpResult::Unbounded),
        PhaseEnd::Optimal => {
            let assignment = tableau.x[..tableau.n].to_vec();
            let violation = lp.max_violation(&assignment);
            if violation > FEASIBILITY_TOL {
                return Err(Error::NumericalFailure(format!(
                    "final assignment violates the LP by {violation:e}"
                )));
            }
            Ok(LpResult::Optimal {
                objective: lp.objective_value(&assignment),
                assignment,
            })
        }
    }
}

struct Runner {
    deadline: Option<Instant>,
    iterations_left: usize,
}

impl Runner {
    fn tick(&mut self) -> Result<()> {
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                return Err(Error::DeadlineExceeded);
            }
        }
        if self.iterations_left == 0 {
            return Err(Error::NumericalFailure("iteration cap reached".into()));
        }
        self.iterations_left -= 1;
        Ok(())
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    n: usize,
    ncols: usize,
    first_artificial: usize,
    num_artificial: usize,
    scale: f64,
    /// Original constraint matrix over all columns, row-major `m × ncols`.
    a: Vec<f64>,
    rhs: Vec<f64>,
    /// Current `B⁻¹A`.
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    d: Vec<f64>,
    pivots_since_refactor: usize,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.constraints().len();

        let mut x = vec![0.0; n + m];
        let mut lower = lp.lower().to_vec();
        let mut upper = lp.upper().to_vec();
        for j in 0..n {
            x[j] = if lower[j].is_finite() {
                lower[j]
            } else if upper[j].is_finite() {
                upper[j]
            } else {
                0.0
            };
        }

        let mut basis = vec![NONBASIC; m];
        // (row, sign) of each artificial column
        let mut artificials = Vec::new();
        for (i, row) in lp.constraints().iter().enumerate() {
            let (lo, hi) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            let residual = row.rhs - row.activity(&x);
            if lo <= residual && residual <= hi {
                x[n + i] = residual;
                basis[i] = n + i;
            } else {
                let bound = if residual < lo { lo } else { hi };
                x[n + i] = bound;
                let sign = if residual - bound >= 0.0 { 1.0 } else { -1.0 };
                artificials.push((i, sign, (residual - bound).abs()));
            }
        }

        let first_artificial = n + m;
        let ncols = first_artificial + artificials.len();
        let mut a = vec![0.0; m * ncols];
        for (i, row) in lp.constraints().iter().enumerate() {
            for &(j, v) in &row.coefficients {
                a[i * ncols + j] += v;
            }
            a[i * ncols + n + i] = 1.0;
        }
        for (k, &(i, sign, value)) in artificials.iter().enumerate() {
            let col = first_artificial + k;
            a[i * ncols + col] = sign;
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(value);
            basis[i] = col;
        }
        let mut row_of = vec![NONBASIC; ncols];
        for (i, &b) in basis.iter().enumerate() {
            row_of[b] = i;
        }

        // Every basic column is a signed unit vector, so B⁻¹A only needs
        // sign flips of the artificial rows.
        let mut t = a.clone();
        for &(i, sign, _) in &artificials {
            if sign < 0.0 {
                for v in &mut t[i * ncols..(i + 1) * ncols] {
                    *v = -*v;
                }
            }
        }

        let scale = lp
            .constraints()
            .iter()
            .map(|c| c.rhs.abs())
            .fold(1.0, f64::max);

        Self {
            m,
            n,
            ncols,
            first_artificial,
            num_artificial: artificials.len(),
            scale,
            a,
            rhs: lp.constraints().iter().map(|c| c.rhs).collect(),
            t,
            lower,
            upper,
            x,
            basis,
            row_of,
            d: vec![0.0; ncols],
            pivots_since_refactor: 0,
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn compute_reduced_costs(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
            for (d, &v) in self.d.iter_mut().zip(row) {
                *d -= cb * v;
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    /// Rebuilds `B⁻¹A` and the basic values from the original matrix with
    /// Gauss-Jordan elimination and partial pivoting.
    fn refactor(&mut self) -> Result<()> {
        let (m, nc) = (self.m, self.ncols);
        if m == 0 {
            return Ok(());
        }
        let w = m + nc + 1;
        let mut aug = vec![0.0; m * w];
        for i in 0..m {
            for (k, &b) in self.basis.iter().enumerate() {
                aug[i * w + k] = self.a[i * nc + b];
            }
            aug[i * w + m..i * w + m + nc].copy_from_slice(&self.a[i * nc..(i + 1) * nc]);
            let mut r = self.rhs[i];
            for j in 0..nc {
                if self.row_of[j] == NONBASIC && self.x[j] != 0.0 {
                    r -= self.a[i * nc + j] * self.x[j];
                }
            }
            aug[i * w + m + nc] = r;
        }
        for col in 0..m {
            let (piv_row, piv_val) =
                (col..m)
                    .map(|r| (r, aug[r * w + col].abs()))
                    .fold(
                        (col, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if piv_val < 1e-11 {
                return Err(Error::NumericalFailure("singular basis".into()));
            }
            if piv_row != col {
                for k in 0..w {
                    aug.swap(piv_row * w + k, col * w + k);
                }
            }
            let inv = 1.0 / aug[col * w + col];
            for k in 0..w {
                aug[col * w + k] *= inv;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = aug[r * w + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..w {
                    aug[r * w + k] -= f * aug[col * w + k];
                }
            }
        }
        for i in 0..m {
            self.t[i * nc..(i + 1) * nc].copy_from_slice(&aug[i * w + m..i * w + m + nc]);
            self.x[self.basis[i]] = aug[i * w + m + nc];
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncols;
        let inv = 1.0 / self.t[r * nc + q];
        for v in &mut self.t[r * nc..(r + 1) * nc] {
            *v *= inv;
        }
        let pivot_row: Vec<f64> = self.t[r * nc..(r + 1) * nc].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + q];
            if f == 0.0 {
                continue;
            }
            for (v, &p) in self.t[i * nc..(i + 1) * nc].iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.t[i * nc + q] = 0.0;
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for (d, &p) in self.d.iter_mut().zip(&pivot_row) {
                *d -= dq * p;
            }
            self.d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.row_of[leaving] = NONBASIC;
        self.basis[r] = q;
        self.row_of[q] = r;
        self.pivots_since_refactor += 1;
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            if self.row_of[j] != NONBASIC || self.is_fixed(j) {
                continue;
            }
            let dj = self.d[j];
            let can_increase = self.x[j] < self.upper[j];
            let can_decrease = self.x[j] > self.lower[j];
            let dir = if dj < -OPTIMALITY_TOL && can_increase {
                1.0
            } else if dj > OPTIMALITY_TOL && can_decrease {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn run_phase(&mut self, cost: &[f64], runner: &mut Runner) -> Result<PhaseEnd> {
        self.refactor()?;
        self.compute_reduced_costs(cost);
        let degenerate_limit = 2 * (self.m + self.ncols);
        let mut degenerate_run = 0;
        let mut bland = false;
        loop {
            runner.tick()?;
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                self.compute_reduced_costs(cost);
            }
            let Some((q, dir)) = self.choose_entering(bland) else {
                self.refactor()?;
                self.compute_reduced_costs(cost);
                // Confirm optimality on the fresh factorization.
                if self.choose_entering(bland).is_none() {
                    return Ok(PhaseEnd::Optimal);
                }
                continue;
            };

            let nc = self.ncols;
            let span = if dir > 0.0 {
                self.upper[q] - self.x[q]
            } else {
                self.x[q] - self.lower[q]
            };
            // (row, step, leaves at upper)
            let mut leave: Option<(usize, f64, bool)> = None;
            for i in 0..self.m {
                let tiq = self.t[i * nc + q];
                if tiq.abs() <= PIVOT_TOL {
                    continue;
                }
                let alpha = dir * tiq;
                let b = self.basis[i];
                let (ratio, to_upper) = if alpha > 0.0 {
                    if !self.lower[b].is_finite() {
                        continue;
                    }
                    (((self.x[b] - self.lower[b]) / alpha).max(0.0), false)
                } else {
                    if !self.upper[b].is_finite() {
                        continue;
                    }
                    (((self.upper[b] - self.x[b]) / -alpha).max(0.0), true)
                };
                let better = match leave {
                    None => true,
                    Some((r, best, _)) => {
                        if ratio < best - DEGENERATE_STEP {
                            true
                        } else if ratio <= best + DEGENERATE_STEP {
                            if bland {
                                b < self.basis[r]
                            } else {
                                tiq.abs() > self.t[r * nc + q].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((i, ratio, to_upper));
                }
            }

            let step = match leave {
                Some((_, ratio, _)) if ratio < span => ratio,
                _ if span.is_finite() => span,
                _ => return Ok(PhaseEnd::Unbounded),
            };
            for i in 0..self.m {
                let tiq = self.t[i * nc + q];
                if tiq != 0.0 {
                    self.x[self.basis[i]] -= dir * tiq * step;
                }
            }
            match leave {
                Some((r, ratio, to_upper)) if ratio < span => {
                    let b = self.basis[r];
                    self.x[q] += dir * step;
                    self.x[b] = if to_upper {
                        self.upper[b]
                    } else {
                        self.lower[b]
                    };
                    self.pivot(r, q);
                }
                _ => {
                    self.x[q] = if dir > 0.0 {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                }
            }

            if step <= DEGENERATE_STEP {
                degenerate_run += 1;
                if degenerate_run > degenerate_limit && !bland {
                    log::debug!(
                        "switching to Bland's rule after {degenerate_run} degenerate pivots"
                    );
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
    }

    /// Pins every artificial at zero and pivots basic ones out where possible.
    fn retire_artificials(&mut self) -> Result<()> {
        for j in self.first_artificial..self.ncols {
            self.upper[j] = 0.0;
            if self.row_of[j] == NONBASIC {
                self.x[j] = 0.0;
            }
        }
        let nc = self.ncols;
        for r in 0..self.m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let candidate = (0..self.first_artificial)
                .filter(|&j| self.row_of[j] == NONBASIC)
                .map(|j| (j, self.t[r * nc + j].abs()))
                .fold(None, |best: Option<(usize, f64)>, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            if let Some((j, mag)) = candidate {
                if mag > 1e-7 {
                    let b = self.basis[r];
                    self.pivot(r, j);
                    self.x[b] = 0.0;
                }
            }
        }
        self.refactor()
    }
}
