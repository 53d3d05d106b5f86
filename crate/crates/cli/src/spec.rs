//! Problem files.
//!
//! A problem is a TOML document. Keys common to both kinds:
//!
//! ```toml
//! kind = "output-optimization"      # or "min-adversarial-linf"
//! network = "net.nnet"              # relative to the problem file
//! solver = "branch-bound"           # bisection, brute-force, fgsm, pgd, milp-export
//!
//! [config]                          # all optional
//! timeout = 120.0                   # seconds
//! split = "largest-violation"       # or "earliest-unfixed"
//! order = "best-first"              # or "depth-first"
//! warm_start = "none"               # or "pgd"
//! preprocess = "lp"                 # or "interval"
//! per_query_timeout = 1.0
//! gap = 1e-4
//! pgd_steps = 1000
//! pgd_step_fraction = 0.1
//! ```
//!
//! Output optimization takes `objective` (coefficients over the outputs),
//! `direction` (`"maximize"` by default), the box `lower`/`upper`, and
//! optional `[[rows]]`. Minimum L∞ perturbation takes `x0`, `radius`,
//! optional `dims` (perturbed input indices, all by default) and
//! `domain = { lower, upper }`, plus exactly one target:
//!
//! ```toml
//! target = { label = 1, versus = [0], margin = 0.0 }   # y₁ − y₀ ≥ margin
//! untargeted = { label = 0, margin = 0.0 }             # some yₖ − y₀ ≥ margin
//! [[rows]]                                             # or explicit rows
//! coefficients = [1.0, -1.0]
//! relation = ">="
//! rhs = 0.0
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// A field-precise validation failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("field '{field}': {reason}")]
pub struct SchemaError {
    pub field: String,
    pub reason: String,
}

impl SchemaError {
    fn new(field: &str, reason: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    BranchBound,
    Bisection,
    BruteForce,
    Fgsm,
    Pgd,
    MilpExport,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::BranchBound,
        SolverKind::Bisection,
        SolverKind::BruteForce,
        SolverKind::Fgsm,
        SolverKind::Pgd,
        SolverKind::MilpExport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::BranchBound => "branch-bound",
            SolverKind::Bisection => "bisection",
            SolverKind::BruteForce => "brute-force",
            SolverKind::Fgsm => "fgsm",
            SolverKind::Pgd => "pgd",
            SolverKind::MilpExport => "milp-export",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Approximate solvers only produce lower bounds.
    pub fn is_approximate(self) -> bool {
        matches!(self, SolverKind::Fgsm | SolverKind::Pgd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitName {
    EarliestUnfixed,
    LargestViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderName {
    BestFirst,
    DepthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmStartName {
    None,
    Pgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreprocessName {
    Interval,
    Lp,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<OrderName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<WarmStartName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocessName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_query_timeout: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pgd_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pgd_step_fraction: Option<f64>,
}

impl ConfigOverrides {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowRelation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

/// `coefficientsᵀy relation rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub coefficients: Vec<f64>,
    pub relation: RowRelation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionName {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Rows(Vec<RowSpec>),
    /// `y_label − y_v ≥ margin` for every `v` in `versus`.
    Label {
        label: usize,
        versus: Vec<usize>,
        margin: f64,
    },
    /// Some other class beats `label` by `margin`.
    Untargeted {
        label: usize,
        margin: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecKind {
    OutputOptimization {
        objective: Vec<f64>,
        direction: DirectionName,
        lower: Vec<f64>,
        upper: Vec<f64>,
        rows: Vec<RowSpec>,
    },
    MinAdversarialLinf {
        x0: Vec<f64>,
        radius: f64,
        dims: Option<Vec<usize>>,
        domain: Option<(Vec<f64>, Vec<f64>)>,
        target: Target,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub network: PathBuf,
    pub solver: SolverKind,
    pub kind: SpecKind,
    pub config: ConfigOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    label: usize,
    versus: Vec<usize>,
    #[serde(default)]
    margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUntargeted {
    label: usize,
    #[serde(default)]
    margin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    network: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    direction: Option<DirectionName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    upper: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dims: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain: Option<RawDomain>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<RawTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    untargeted: Option<RawUntargeted>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<RowSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<ConfigOverrides>,
}

const OUTPUT_KIND: &str = "output-optimization";
const ADV_KIND: &str = "min-adversarial-linf";

/// Key on the line containing byte `offset`, used to name the field of a
/// type error.
fn key_at(text: &str, offset: usize) -> String {
    let start = text[..offset.min(text.len())]
        .rfind('\n')
        .map_or(0, |i| i + 1);
    let line = text[start..].lines().next().unwrap_or("");
    match line.split_once('=') {
        Some((key, _)) => key.trim().to_string(),
        None => line.trim().trim_matches(['[', ']']).to_string(),
    }
}

fn unknown_field(message: &str) -> Option<String> {
    let rest = message.split("unknown field `").nth(1)?;
    Some(rest.split('`').next()?.to_string())
}

fn missing_field(message: &str) -> Option<String> {
    let rest = message.split("missing field `").nth(1)?;
    Some(rest.split('`').next()?.to_string())
}

fn finite(field: &str, values: &[f64]) -> Result<(), SchemaError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SchemaError::new(field, "values must be finite"))
    }
}

fn forbid(field: &str, present: bool, kind: &str) -> Result<(), SchemaError> {
    if present {
        Err(SchemaError::new(
            field,
            format!("not allowed for kind {kind}"),
        ))
    } else {
        Ok(())
    }
}

fn require<T>(field: &str, value: Option<T>, kind: &str) -> Result<T, SchemaError> {
    value.ok_or_else(|| SchemaError::new(field, format!("required for kind {kind}")))
}

fn check_rows(rows: &[RowSpec]) -> Result<(), SchemaError> {
    for r in rows {
        finite("rows", &r.coefficients)?;
        finite("rows", &[r.rhs])?;
        if r.coefficients.is_empty() {
            return Err(SchemaError::new("rows", "coefficients must not be empty"));
        }
    }
    Ok(())
}

/// Parses and validates a problem file.
pub fn parse_problem(text: &str) -> Result<ProblemSpec, SchemaError> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let field = unknown_field(&message)
            .or_else(|| missing_field(&message))
            .or_else(|| e.span().map(|s| key_at(text, s.start)))
            .unwrap_or_else(|| "<document>".into());
        SchemaError::new(&field, message)
    })?;
    validate(raw)
}

fn validate(raw: RawSpec) -> Result<ProblemSpec, SchemaError> {
    let kind_name = raw
        .kind
        .clone()
        .ok_or_else(|| SchemaError::new("kind", "missing"))?;
    let network = PathBuf::from(
        raw.network
            .clone()
            .ok_or_else(|| SchemaError::new("network", "missing"))?,
    );
    let solver = match &raw.solver {
        None => SolverKind::BranchBound,
        Some(s) => SolverKind::from_name(s)
            .ok_or_else(|| SchemaError::new("solver", format!("unknown solver '{s}'")))?,
    };
    let config = raw.config.clone().unwrap_or_default();
    for (name, v) in [
        ("config.timeout", config.timeout),
        ("config.per_query_timeout", config.per_query_timeout),
    ] {
        if let Some(v) = v {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SchemaError::new(
                    name,
                    "must be a finite non-negative number",
                ));
            }
        }
    }
    if let Some(t) = config.timeout {
        if t == 0.0 {
            return Err(SchemaError::new("config.timeout", "must be positive"));
        }
    }
    if let Some(g) = config.gap {
        if !(g > 0.0 && g.is_finite()) {
            return Err(SchemaError::new("config.gap", "must be positive"));
        }
    }
    if let Some(f) = config.pgd_step_fraction {
        if !(f > 0.0 && f.is_finite()) {
            return Err(SchemaError::new(
                "config.pgd_step_fraction",
                "must be positive",
            ));
        }
    }
    if config.pgd_steps == Some(0) {
        return Err(SchemaError::new("config.pgd_steps", "must be at least 1"));
    }

    let kind = match kind_name.as_str() {
        OUTPUT_KIND => {
            let k = OUTPUT_KIND;
            forbid("x0", raw.x0.is_some(), k)?;
            forbid("radius", raw.radius.is_some(), k)?;
            forbid("dims", raw.dims.is_some(), k)?;
            forbid("domain", raw.domain.is_some(), k)?;
            forbid("target", raw.target.is_some(), k)?;
            forbid("untargeted", raw.untargeted.is_some(), k)?;
            let objective = require("objective", raw.objective, k)?;
            let lower = require("lower", raw.lower, k)?;
            let upper = require("upper", raw.upper, k)?;
            finite("objective", &objective)?;
            if objective.is_empty() {
                return Err(SchemaError::new("objective", "must not be empty"));
            }
            if lower.len() != upper.len() {
                return Err(SchemaError::new("upper", "length differs from lower"));
            }
            if lower.is_empty() {
                return Err(SchemaError::new("lower", "must not be empty"));
            }
            if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
                return Err(SchemaError::new(
                    "upper",
                    format!("upper[{i}] < lower[{i}]"),
                ));
            }
            let rows = raw.rows.unwrap_or_default();
            check_rows(&rows)?;
            SpecKind::OutputOptimization {
                objective,
                direction: raw.direction.unwrap_or(DirectionName::Maximize),
                lower,
                upper,
                rows,
            }
        }
        ADV_KIND => {
            let k = ADV_KIND;
            forbid("objective", raw.objective.is_some(), k)?;
            forbid("direction", raw.direction.is_some(), k)?;
            forbid("lower", raw.lower.is_some(), k)?;
            forbid("upper", raw.upper.is_some(), k)?;
            let x0 = require("x0", raw.x0, k)?;
            let radius = require("radius", raw.radius, k)?;
            finite("x0", &x0)?;
            if x0.is_empty() {
                return Err(SchemaError::new("x0", "must not be empty"));
            }
            if !(radius >= 0.0 && radius.is_finite()) {
                return Err(SchemaError::new(
                    "radius",
                    "must be a finite non-negative number",
                ));
            }
            if let Some(dims) = &raw.dims {
                if dims.is_empty() {
                    return Err(SchemaError::new("dims", "must not be empty"));
                }
                if let Some(&d) = dims.iter().find(|&&d| d >= x0.len()) {
                    return Err(SchemaError::new("dims", format!("index {d} out of range")));
                }
            }
            let domain = match raw.domain {
                None => None,
                Some(d) => {
                    if d.lower.len() != x0.len() || d.upper.len() != x0.len() {
                        return Err(SchemaError::new("domain", "length differs from x0"));
                    }
                    Some((d.lower, d.upper))
                }
            };
            let target = match (raw.target, raw.untargeted, raw.rows) {
                (Some(t), None, None) => {
                    if t.versus.is_empty() {
                        return Err(SchemaError::new("target", "versus must not be empty"));
                    }
                    if t.versus.contains(&t.label) {
                        return Err(SchemaError::new("target", "label listed in versus"));
                    }
                    Target::Label {
                        label: t.label,
                        versus: t.versus,
                        margin: t.margin,
                    }
                }
                (None, Some(u), None) => Target::Untargeted {
                    label: u.label,
                    margin: u.margin,
                },
                (None, None, Some(rows)) => {
                    check_rows(&rows)?;
                    if rows.is_empty() {
                        return Err(SchemaError::new("rows", "must not be empty"));
                    }
                    Target::Rows(rows)
                }
                (None, None, None) => {
                    return Err(SchemaError::new(
                        "target",
                        "one of target, untargeted or rows is required",
                    ))
                }
                _ => {
                    return Err(SchemaError::new(
                        "target",
                        "only one of target, untargeted or rows may be given",
                    ))
                }
            };
            SpecKind::MinAdversarialLinf {
                x0,
                radius,
                dims: raw.dims,
                domain,
                target,
            }
        }
        other => return Err(SchemaError::new("kind", format!("unknown kind '{other}'"))),
    };
    Ok(ProblemSpec {
        network,
        solver,
        kind,
        config,
    })
}

/// Serializes a spec; [`parse_problem`] reads it back unchanged.
pub fn write_problem(spec: &ProblemSpec) -> String {
    let mut raw = RawSpec {
        network: Some(spec.network.to_string_lossy().into_owned()),
        solver: Some(spec.solver.name().to_string()),
        config: (!spec.config.is_empty()).then(|| spec.config.clone()),
        ..RawSpec::default()
    };
    match &spec.kind {
        SpecKind::OutputOptimization {
            objective,
            direction,
            lower,
            upper,
            rows,
        } => {
            raw.kind = Some(OUTPUT_KIND.into());
            raw.objective = Some(objective.clone());
            raw.direction = Some(*direction);
            raw.lower = Some(lower.clone());
            raw.upper = Some(upper.clone());
            raw.rows = (!rows.is_empty()).then(|| rows.clone());
        }
        SpecKind::MinAdversarialLinf {
            x0,
            radius,
            dims,
            domain,
            target,
        } => {
            raw.kind = Some(ADV_KIND.into());
            raw.x0 = Some(x0.clone());
            raw.radius = Some(*radius);
            raw.dims = dims.clone();
            raw.domain = domain.as_ref().map(|(l, u)| RawDomain {
                lower: l.clone(),
                upper: u.clone(),
            });
            match target {
                Target::Rows(rows) => raw.rows = Some(rows.clone()),
                Target::Label {
                    label,
                    versus,
                    margin,
                } => {
                    raw.target = Some(RawTarget {
                        label: *label,
                        versus: versus.clone(),
                        margin: *margin,
                    })
                }
                Target::Untargeted { label, margin } => {
                    raw.untargeted = Some(RawUntargeted {
                        label: *label,
                        margin: *margin,
                    })
                }
            }
        }
    }
    toml::to_string(&raw).expect("problem specs always serialize")
}
