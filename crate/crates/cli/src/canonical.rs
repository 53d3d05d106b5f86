//! Turning problem specs into canonical maximization problems.

use reluopt::geometry::Hyperrectangle;
use reluopt::lp::Relation;
use reluopt::problem::{Epigraph, LinearForm, OptimizationProblem, OutputRow};
use reluopt::{Error, Network};

use crate::spec::{DirectionName, ProblemSpec, RowRelation, RowSpec, SpecKind, Target};

/// How a canonical value is reported back in the spec's own terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Report {
    /// The value as is.
    Maximized,
    /// Minimization: negate back.
    Minimized,
    /// Min-adversarial: the canonical value is `−distance`.
    Distance,
}

impl Report {
    pub fn reported(self, canonical: f64) -> f64 {
        match self {
            Report::Maximized => canonical,
            Report::Minimized | Report::Distance => -canonical,
        }
    }
}

/// One or more maximization problems whose best value answers the spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Canonical {
    pub problems: Vec<OptimizationProblem>,
    pub report: Report,
}

fn row(input_dim: usize, r: &RowSpec) -> OutputRow {
    let relation = match r.relation {
        RowRelation::Le => Relation::Le,
        RowRelation::Ge => Relation::Ge,
        RowRelation::Eq => Relation::Eq,
    };
    OutputRow::new(
        LinearForm::on_output(input_dim, r.coefficients.clone()),
        relation,
        r.rhs,
    )
}

fn check_rows(net: &Network, rows: &[RowSpec]) -> Result<(), Error> {
    for r in rows {
        if r.coefficients.len() != net.output_dim() {
            return Err(Error::DimensionMismatch {
                what: "row coefficients",
                expected: net.output_dim(),
                found: r.coefficients.len(),
            });
        }
    }
    Ok(())
}

fn check_label(net: &Network, label: usize) -> Result<(), Error> {
    if label < net.output_dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: "output label",
            expected: net.output_dim(),
            found: label,
        })
    }
}

/// `y_a − y_b ≥ margin`.
fn beats(net: &Network, a: usize, b: usize, margin: f64) -> OutputRow {
    let mut c = vec![0.0; net.output_dim()];
    c[a] += 1.0;
    c[b] -= 1.0;
    OutputRow::new(
        LinearForm::on_output(net.input_dim(), c),
        Relation::Ge,
        margin,
    )
}

pub fn canonicalize(spec: &ProblemSpec, net: &Network) -> Result<Canonical, Error> {
    let n = net.input_dim();
    match &spec.kind {
        SpecKind::OutputOptimization {
            objective,
            direction,
            lower,
            upper,
            rows,
        } => {
            if objective.len() != net.output_dim() {
                return Err(Error::DimensionMismatch {
                    what: "objective",
                    expected: net.output_dim(),
                    found: objective.len(),
                });
            }
            check_rows(net, rows)?;
            let input = Hyperrectangle::new(lower.clone(), upper.clone())?;
            let (c, report) = match direction {
                DirectionName::Maximize => (objective.clone(), Report::Maximized),
                DirectionName::Minimize => {
                    (objective.iter().map(|v| -v).collect(), Report::Minimized)
                }
            };
            let p = OptimizationProblem::output_max(input, c)
                .with_rows(rows.iter().map(|r| row(n, r)).collect());
            p.check_dims(net)?;
            Ok(Canonical {
                problems: vec![p],
                report,
            })
        }
        SpecKind::MinAdversarialLinf {
            x0,
            radius,
            dims,
            domain,
            target,
        } => {
            if x0.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "x0",
                    expected: n,
                    found: x0.len(),
                });
            }
            let dims: Vec<usize> = dims.clone().unwrap_or_else(|| (0..n).collect());
            let mut lower = x0.clone();
            let mut upper = x0.clone();
            for &i in &dims {
                lower[i] -= radius;
                upper[i] += radius;
            }
            let mut input = Hyperrectangle::new(lower, upper)?;
            if let Some((l, u)) = domain {
                let d = Hyperrectangle::new(l.clone(), u.clone())?;
                input = input.intersect(&d)?.ok_or(Error::EmptyDomain)?;
            }
            let epigraph = Epigraph {
                center: x0.clone(),
                dims,
            };
            let row_sets: Vec<Vec<OutputRow>> = match target {
                Target::Rows(rows) => {
                    check_rows(net, rows)?;
                    vec![rows.iter().map(|r| row(n, r)).collect()]
                }
                Target::Label {
                    label,
                    versus,
                    margin,
                } => {
                    check_label(net, *label)?;
                    for &v in versus {
                        check_label(net, v)?;
                    }
                    vec![versus
                        .iter()
                        .map(|&v| beats(net, *label, v, *margin))
                        .collect()]
                }
                Target::Untargeted { label, margin } => {
                    check_label(net, *label)?;
                    (0..net.output_dim())
                        .filter(|&k| k != *label)
                        .map(|k| vec![beats(net, k, *label, *margin)])
                        .collect()
                }
            };
            if row_sets.is_empty() {
                return Err(Error::Unsupported(
                    "untargeted query on a single-output network".into(),
                ));
            }
            let problems = row_sets
                .into_iter()
                .map(|rows| {
                    OptimizationProblem::min_adversarial(
                        input.clone(),
                        epigraph.clone(),
                        rows,
                        net.output_dim(),
                    )
                })
                .collect();
            Ok(Canonical {
                problems,
                report: Report::Distance,
            })
        }
    }
}
