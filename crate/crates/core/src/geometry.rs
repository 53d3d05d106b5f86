//! Input and output set representations: boxes, polytopes, reversed-facet
//! disjunctions for polytope complements, and the L∞ epigraph encoding.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::dot;

/// Axis-aligned box `{x : lower ≤ x ≤ upper}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperrectangle {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Hyperrectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim("box upper", lower.len(), upper.len())?;
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::InvalidBox(format!(
                    "dimension {i}: lower {l} exceeds upper {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `center ± radius` in every coordinate.
    pub fn around(center: &[f64], radius: f64) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Half the side length in every coordinate.
    pub fn radius(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (u - l))
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim("point", self.dim(), x.len())?;
        Ok(x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&l, &u))| l - tol <= v && v <= u + tol))
    }

    /// Nearest point of the box.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| v.max(l).min(u))
            .collect()
    }

    /// Intersection, or `None` when empty.
    pub fn intersect(&self, other: &Self) -> Result<Option<Self>> {
        check_dim("box", self.dim(), other.dim())?;
        let lower: Vec<f64> = self
            .lower
            .iter()
            .zip(&other.lower)
            .map(|(a, b)| a.max(*b))
            .collect();
        let upper: Vec<f64> = self
            .upper
            .iter()
            .zip(&other.upper)
            .map(|(a, b)| a.min(*b))
            .collect();
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Ok(None);
        }
        Ok(Some(Self { lower, upper }))
    }
}

/// `{x : A x ≤ b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Polytope {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        check_dim("polytope rhs", a.len(), b.len())?;
        if let Some(first) = a.first() {
            for row in &a {
                check_dim("polytope row", first.len(), row.len())?;
            }
        }
        Ok(Self { a, b })
    }

    pub fn from_box(h: &Hyperrectangle) -> Self {
        let n = h.dim();
        let mut a = Vec::with_capacity(2 * n);
        let mut b = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            a.push(row.clone());
            b.push(h.upper[i]);
            row[i] = -1.0;
            a.push(row);
            b.push(-h.lower[i]);
        }
        Self { a, b }
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.a.iter().map(Vec::as_slice).zip(self.b.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.rows().all(|(a, b)| dot(a, x) <= b + tol)
    }

    /// One reversed halfspace `aᵢᵀx ≥ bᵢ` per row. The result is the closed
    /// relaxation of the (open) complement: boundary points belong to both.
    pub fn complement(&self) -> Result<HalfspaceDisjunction> {
        if self.is_empty() {
            return Err(Error::InvalidBox(
                "complement of an unconstrained polytope is empty".into(),
            ));
        }
        Ok(HalfspaceDisjunction {
            halfspaces: self
                .rows()
                .map(|(a, b)| Halfspace { a: a.to_vec(), b })
                .collect(),
        })
    }
}

pub fn complement(p: &Polytope) -> Result<HalfspaceDisjunction> {
    p.complement()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearObjective {
    pub coefficients: Vec<f64>,
    pub direction: Direction,
}

impl LinearObjective {
    pub fn maximize(coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            direction: Direction::Maximize,
        }
    }

    pub fn minimize(coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            direction: Direction::Minimize,
        }
    }

    /// Coefficients of the equivalent maximization.
    pub fn as_maximization(&self) -> Vec<f64> {
        match self.direction {
            Direction::Maximize => self.coefficients.clone(),
            Direction::Minimize => self.coefficients.iter().map(|c| -c).collect(),
        }
    }
}

/// `aᵀx ≥ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        dot(&self.a, x) >= self.b - tol
    }
}

/// `∨ᵢ aᵢᵀx ≥ bᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceDisjunction {
    pub halfspaces: Vec<Halfspace>,
}

impl HalfspaceDisjunction {
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().any(|h| h.contains(x, tol))
    }
}

/// The auxiliary scalar `t ≥ 0` introduced by [`linf_epigraph`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpigraphVariable {
    /// Column of `t` when the variables are ordered `(x₀ … x_{n-1}, t)`.
    pub index: usize,
    pub lower: f64,
}

/// `coefficients · (x, t) ≤ rhs` over the variables `(x₀ … x_{n-1}, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpigraphRow {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

impl EpigraphRow {
    pub fn holds(&self, x: &[f64], t: f64, tol: f64) -> bool {
        let n = x.len();
        dot(&self.coefficients[..n], x) + self.coefficients[n] * t <= self.rhs + tol
    }
}

/// Rows `xᵢ − x0ᵢ ≤ t` and `x0ᵢ − xᵢ ≤ t` for every coordinate, so that
/// minimizing `t` minimizes `‖x − x0‖∞`.
pub fn linf_epigraph(x0: &[f64]) -> (EpigraphVariable, Vec<EpigraphRow>) {
    let dims: Vec<usize> = (0..x0.len()).collect();
    linf_epigraph_dims(x0, &dims)
}

/// Epigraph over a subset of coordinates: the norm only measures `dims`.
pub fn linf_epigraph_dims(x0: &[f64], dims: &[usize]) -> (EpigraphVariable, Vec<EpigraphRow>) {
    let n = x0.len();
    let mut rows = Vec::with_capacity(2 * dims.len());
    for &i in dims {
        let mut up = vec![0.0; n + 1];
        up[i] = 1.0;
        up[n] = -1.0;
        rows.push(EpigraphRow {
            coefficients: up,
            rhs: x0[i],
        });
        let mut down = vec![0.0; n + 1];
        down[i] = -1.0;
        down[n] = -1.0;
        rows.push(EpigraphRow {
            coefficients: down,
            rhs: -x0[i],
        });
    }
    (
        EpigraphVariable {
            index: n,
            lower: 0.0,
        },
        rows,
    )
}

pub fn linf_distance(x: &[f64], x0: &[f64]) -> f64 {
    x.iter()
        .zip(x0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
