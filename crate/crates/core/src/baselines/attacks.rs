//! Gradient-sign attacks. Both return box-feasible points, so their values
//! are lower bounds on the maximum of `cᵀf(x)` over the box.

use crate::error::{check_dim, Result};
use crate::geometry::Hyperrectangle;
use crate::model::{dot, Network};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgdConfig {
    pub steps: usize,
    /// Step length per dimension as a fraction of that dimension's radius.
    pub step_fraction: f64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            step_fraction: 0.1,
        }
    }
}

/// Per-dimension distance from `x0` to the far face of the box.
fn reach(x0: &[f64], input: &Hyperrectangle) -> Vec<f64> {
    x0.iter()
        .zip(input.lower().iter().zip(input.upper()))
        .map(|(&x, (&l, &u))| (u - x).max(x - l))
        .collect()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn value(net: &Network, x: &[f64], c: &[f64]) -> Result<f64> {
    Ok(dot(c, &net.evaluate(x)?))
}

/// One signed-gradient step to the boundary of the box.
pub fn fgsm(
    net: &Network,
    x0: &[f64],
    c: &[f64],
    input: &Hyperrectangle,
) -> Result<(Vec<f64>, f64)> {
    check_dim("fgsm start point", input.dim(), x0.len())?;
    let g = net.gradient(x0, c)?;
    let r = reach(x0, input);
    let x: Vec<f64> = x0
        .iter()
        .zip(&g)
        .zip(&r)
        .map(|((&x, &gi), &ri)| x + ri * sign(gi))
        .collect();
    let x = input.project(&x);
    let v = value(net, &x, c)?;
    Ok((x, v))
}

/// Projected signed-gradient ascent; returns the best iterate seen,
/// including the start point.
pub fn pgd(
    net: &Network,
    x0: &[f64],
    c: &[f64],
    input: &Hyperrectangle,
    config: &PgdConfig,
) -> Result<(Vec<f64>, f64)> {
    check_dim("pgd start point", input.dim(), x0.len())?;
    let step: Vec<f64> = reach(x0, input)
        .iter()
        .map(|r| r * config.step_fraction)
        .collect();
    let mut x = input.project(x0);
    let mut best_v = value(net, &x, c)?;
    let mut best_x = x.clone();
    for _ in 0..config.steps.max(1) {
        let g = net.gradient(&x, c)?;
        let next: Vec<f64> = x
            .iter()
            .zip(&g)
            .zip(&step)
            .map(|((&xi, &gi), &s)| xi + s * sign(gi))
            .collect();
        let next = input.project(&next);
        if next == x {
            break;
        }
        x = next;
        let v = value(net, &x, c)?;
        if v > best_v {
            best_v = v;
            best_x = x.clone();
        }
    }
    Ok((best_x, best_v))
}
