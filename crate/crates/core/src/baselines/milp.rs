//! Big-M mixed-integer encoding of a problem and its LP file format.
//!
//! Every undetermined ReLU with bounds `L̂ < 0 < Û` gets a binary `δ` and the
//! rows `z ≥ 0`, `z ≥ ẑ`, `z ≤ ẑ − L̂(1 − δ)`, `z ≤ Ûδ`. Nodes fixed by the
//! bounds keep their linear rows and get no binary.
//!
//! The text format accepted by [`parse_lp_format`]:
//!
//! ```text
//! file      := comment* objsense objective "Subject To" row* ["Bounds" bound*]
//!              ["Binary" name*] "End"
//! objsense  := "Maximize" | "Minimize"
//! objective := [label ":"] terms
//! row       := [label ":"] terms ("<=" | ">=" | "=") number
//! terms     := [sign] [number] name (sign [number] name)*
//! bound     := name "free" | name ("<=" | ">=" | "=") number
//!            | number "<=" name "<=" number          (one bound per line)
//! ```
//!
//! Section keywords are case-insensitive, `\` starts a comment, rows may span
//! lines, `inf`/`infinity` are accepted in bounds and unlisted variables
//! default to `[0, ∞)`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::bounds::{fixed_by_bounds, BoundsMap};
use crate::error::{Error, Result};
use crate::geometry::Direction;
use crate::lp::{build_relaxed_lp, Constraint, LinearProgram, Relation, VariableIndexMap};
use crate::model::{Network, NodeId};
use crate::problem::OptimizationProblem;
use crate::search::{PartialActivationState, Phase};

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    /// All rows and columns; binaries are ordinary `[0, 1]` columns here.
    pub lp: LinearProgram,
    /// Binary columns with the node they switch.
    pub binaries: Vec<(NodeId, usize)>,
    /// Network columns; empty when the model was parsed from text.
    pub map: Option<VariableIndexMap>,
}

impl MilpModel {
    /// The LP obtained by fixing every binary to the given value.
    pub fn with_binaries(&self, values: &[bool]) -> Result<LinearProgram> {
        if values.len() != self.binaries.len() {
            return Err(Error::DimensionMismatch {
                what: "binary assignment",
                expected: self.binaries.len(),
                found: values.len(),
            });
        }
        let mut lp = self.lp.clone();
        for (&(_, col), &on) in self.binaries.iter().zip(values) {
            let v = if on { 1.0 } else { 0.0 };
            lp.set_bounds(col, v, v);
        }
        Ok(lp)
    }

    pub fn binary_columns(&self) -> Vec<usize> {
        self.binaries.iter().map(|&(_, c)| c).collect()
    }

    pub fn to_lp_format(&self) -> String {
        write_lp_format(&self.lp, &self.binary_columns())
    }
}

/// Encodes `problem` as a big-M MILP using `bounds` for the constants.
pub fn export_milp(
    net: &Network,
    problem: &OptimizationProblem,
    bounds: &BoundsMap,
) -> Result<MilpModel> {
    let state = PartialActivationState::from_fixed(net, &fixed_by_bounds(bounds));
    let (mut lp, map) = build_relaxed_lp(net, &state, bounds, problem)?;
    let mut binaries = Vec::new();
    for id in state.undetermined() {
        let pre = bounds.pre(id);
        if !pre.lo.is_finite() || !pre.hi.is_finite() {
            return Err(Error::UnboundedNode(id));
        }
        debug_assert_eq!(state.phase(id), Phase::Undetermined);
        let k = net.relu_layers()[id.layer];
        let zh = map.pre_var(net, id);
        let z = map.post_var(net, id);
        let d = lp.add_variable(format!("delta_{k}_{}", id.node), 0.0, 1.0);
        // z − ẑ − L̂δ ≤ −L̂
        lp.add_constraint(Constraint::new(
            vec![(z, 1.0), (zh, -1.0), (d, -pre.lo)],
            Relation::Le,
            -pre.lo,
        ))?;
        // z − Ûδ ≤ 0
        lp.add_constraint(Constraint::new(
            vec![(z, 1.0), (d, -pre.hi)],
            Relation::Le,
            0.0,
        ))?;
        binaries.push((id, d));
    }
    Ok(MilpModel {
        lp,
        binaries,
        map: Some(map),
    })
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    let mut line_len = 0;
    for (i, &(j, c)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else { "+" };
        let piece = if i == 0 && c >= 0.0 {
            format!("{:?} {}", c, names[j])
        } else {
            format!("{sign} {:?} {}", c.abs(), names[j])
        };
        // keep lines well under the usual 255-character limit
        if line_len > 0 && line_len + piece.len() > 200 {
            out.push_str("\n   ");
            line_len = 0;
        }
        out.push(' ');
        out.push_str(&piece);
        line_len += piece.len() + 1;
    }
    if terms.is_empty() {
        // an empty form still needs a term
        out.push_str(" 0 ");
        out.push_str(&names[0]);
    }
}

/// Serializes `lp` in LP file format, declaring `binaries` in a Binary
/// section.
pub fn write_lp_format(lp: &LinearProgram, binaries: &[usize]) -> String {
    let names = lp.names();
    let mut out = String::new();
    out.push_str(match lp.direction() {
        Direction::Maximize => "Maximize\n",
        Direction::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    let obj: Vec<(usize, f64)> = lp
        .objective()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(j, &c)| (j, c))
        .collect();
    write_terms(&mut out, &obj, names);
    out.push_str("\nSubject To\n");
    for (r, row) in lp.constraints().iter().enumerate() {
        let _ = write!(out, " c{r}:");
        write_terms(&mut out, &row.coefficients, names);
        let _ = writeln!(out, " {} {}", row.relation, fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    let is_binary: Vec<bool> = (0..lp.num_vars()).map(|j| binaries.contains(&j)).collect();
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.lower()[j], lp.upper()[j]);
        let name = &names[j];
        if is_binary[j] && l == 0.0 && u == 1.0 {
            continue;
        }
        let _ = match (l.is_finite(), u.is_finite()) {
            _ if l == u => writeln!(out, " {name} = {}", fmt_num(l)),
            (false, false) => writeln!(out, " {name} free"),
            (true, false) => writeln!(out, " {name} >= {}", fmt_num(l)),
            _ => writeln!(out, " {} <= {name} <= {}", fmt_num(l), fmt_num(u)),
        };
    }
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for &j in binaries {
            let _ = writeln!(out, " {}", names[j]);
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Name(String),
    Num(f64),
    Sign(f64),
    Rel(Relation),
    Colon,
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>> {
    let err = |reason: String| Error::Parse {
        line: line_no,
        reason,
    };
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\\' {
            break;
        } else if c == ':' {
            out.push(Token::Colon);
            i += 1;
        } else if c == '+' || c == '-' {
            out.push(Token::Sign(if c == '-' { -1.0 } else { 1.0 }));
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let rel = match c {
                '<' => Relation::Le,
                '>' => Relation::Ge,
                _ => Relation::Eq,
            };
            i += 1;
            if c != '=' && i < chars.len() && chars[i] == '=' {
                i += 1;
            } else if c == '=' && i < chars.len() && (chars[i] == '<' || chars[i] == '>') {
                // "=<" and "=>"
                out.push(Token::Rel(if chars[i] == '<' {
                    Relation::Le
                } else {
                    Relation::Ge
                }));
                i += 1;
                continue;
            }
            out.push(Token::Rel(rel));
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    i = k;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| err(format!("bad number '{text}'")))?;
            out.push(Token::Num(v));
        } else if c.is_alphabetic() || "_!\"#$%&()/,;?@`'{}|~".contains(c) {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && !"+-<>=:\\".contains(chars[i]) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let lower = text.to_ascii_lowercase();
            if lower == "inf" || lower == "infinity" {
                out.push(Token::Num(f64::INFINITY));
            } else {
                out.push(Token::Name(text));
            }
        } else {
            return Err(err(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Rows,
    Bounds,
    Binary,
    End,
}

fn section_header(line: &str) -> Option<Section> {
    let words: Vec<String> = line
        .split_whitespace()
        .map(|w| w.to_ascii_lowercase())
        .collect();
    let joined = words.join(" ");
    match joined.as_str() {
        "maximize" | "maximum" | "max" | "minimize" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." | "st." => Some(Section::Rows),
        "bounds" | "bound" => Some(Section::Bounds),
        "binary" | "binaries" | "bin" => Some(Section::Binary),
        "end" => Some(Section::End),
        _ => None,
    }
}

struct Builder {
    lp: LinearProgram,
    index: HashMap<String, usize>,
    /// whether a column's bounds were set explicitly
    touched: Vec<bool>,
}

impl Builder {
    fn column(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.lp.add_variable(name, 0.0, f64::INFINITY);
        self.index.insert(name.to_string(), j);
        self.touched.push(false);
        j
    }
}

/// Reads a linear form from `tokens[*pos..]`, stopping at a relation or
/// the end of the slice.
fn parse_terms(
    tokens: &[(Token, usize)],
    pos: &mut usize,
    builder: &mut Builder,
) -> Result<Vec<(usize, f64)>> {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    while let Some((tok, line)) = tokens.get(*pos) {
        match tok {
            Token::Rel(_) => break,
            Token::Sign(s) => sign *= s,
            Token::Num(v) => {
                if coef.is_some() {
                    return Err(Error::Parse {
                        line: *line,
                        reason: "two numbers in a row".into(),
                    });
                }
                coef = Some(*v);
            }
            Token::Name(name) => {
                let j = builder.column(name);
                let c = sign * coef.unwrap_or(1.0);
                match terms.iter_mut().find(|(k, _)| *k == j) {
                    Some(t) => t.1 += c,
                    None => terms.push((j, c)),
                }
                sign = 1.0;
                coef = None;
            }
            Token::Colon => {
                return Err(Error::Parse {
                    line: *line,
                    reason: "unexpected ':'".into(),
                })
            }
        }
        *pos += 1;
    }
    if let Some(c) = coef {
        // trailing constant in the objective is ignored unless nonzero
        if c != 0.0 {
            let line = tokens.get(*pos).or(tokens.last()).map_or(0, |t| t.1);
            return Err(Error::Parse {
                line,
                reason: "constant term without a variable".into(),
            });
        }
    }
    Ok(terms)
}

fn skip_label(tokens: &[(Token, usize)], pos: &mut usize) {
    if let (Some((Token::Name(_), _)), Some((Token::Colon, _))) =
        (tokens.get(*pos), tokens.get(*pos + 1))
    {
        *pos += 2;
    }
}

fn signed_number(tokens: &[Token], i: &mut usize) -> Option<f64> {
    let mut sign = 1.0;
    while let Some(Token::Sign(s)) = tokens.get(*i) {
        sign *= s;
        *i += 1;
    }
    match tokens.get(*i) {
        Some(Token::Num(v)) => {
            *i += 1;
            Some(sign * v)
        }
        _ => None,
    }
}

fn parse_bound_line(tokens: &[Token], line: usize, builder: &mut Builder) -> Result<()> {
    let err = |reason: &str| Error::Parse {
        line,
        reason: reason.into(),
    };
    let mut i = 0;
    if let Some(lo) = signed_number(tokens, &mut i) {
        // number <= name [<= number]
        let (Some(Token::Rel(r1)), Some(Token::Name(name))) = (tokens.get(i), tokens.get(i + 1))
        else {
            return Err(err("expected 'number <= name'"));
        };
        let j = builder.column(name);
        builder.touched[j] = true;
        let (l, u) = (builder.lp.lower()[j], builder.lp.upper()[j]);
        match r1 {
            Relation::Le => builder.lp.set_bounds(j, lo, u),
            Relation::Ge => builder.lp.set_bounds(j, l, lo),
            Relation::Eq => builder.lp.set_bounds(j, lo, lo),
        }
        i += 2;
        if i < tokens.len() {
            let Some(Token::Rel(r2)) = tokens.get(i) else {
                return Err(err("expected a relation"));
            };
            i += 1;
            let hi = signed_number(tokens, &mut i).ok_or_else(|| err("expected a number"))?;
            let (l, u) = (builder.lp.lower()[j], builder.lp.upper()[j]);
            match r2 {
                Relation::Le => builder.lp.set_bounds(j, l, hi),
                Relation::Ge => builder.lp.set_bounds(j, hi, u),
                Relation::Eq => builder.lp.set_bounds(j, hi, hi),
            }
        }
    } else {
        let Some(Token::Name(name)) = tokens.first() else {
            return Err(err("expected a variable name"));
        };
        let j = builder.column(name);
        builder.touched[j] = true;
        match tokens.get(1) {
            Some(Token::Name(w)) if w.eq_ignore_ascii_case("free") => {
                builder.lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY)
            }
            Some(Token::Rel(r)) => {
                let mut k = 2;
                let v = signed_number(tokens, &mut k).ok_or_else(|| err("expected a number"))?;
                let (l, u) = (builder.lp.lower()[j], builder.lp.upper()[j]);
                match r {
                    Relation::Le => builder.lp.set_bounds(j, l, v),
                    Relation::Ge => builder.lp.set_bounds(j, v, u),
                    Relation::Eq => builder.lp.set_bounds(j, v, v),
                }
                i = k;
                if i != tokens.len() {
                    return Err(err("trailing tokens"));
                }
            }
            _ => return Err(err("expected 'free' or a relation")),
        }
    }
    Ok(())
}

/// Parses LP file format text (see the module docs for the grammar).
pub fn parse_lp_format(text: &str) -> Result<MilpModel> {
    let mut builder = Builder {
        lp: LinearProgram::new(Direction::Maximize),
        index: HashMap::new(),
        touched: Vec::new(),
    };
    let mut section = Section::Preamble;
    let mut objective: Vec<(Token, usize)> = Vec::new();
    let mut rows: Vec<(Token, usize)> = Vec::new();
    let mut bound_lines: Vec<(Vec<Token>, usize)> = Vec::new();
    let mut binary_names: Vec<(String, usize)> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_header(line) {
            if s == Section::Objective {
                let first = line.trim().to_ascii_lowercase();
                builder.lp.set_direction(if first.starts_with("min") {
                    Direction::Minimize
                } else {
                    Direction::Maximize
                });
            }
            section = s;
            continue;
        }
        let tokens = tokenize(line, line_no)?;
        match section {
            Section::Preamble => {
                return Err(Error::Parse {
                    line: line_no,
                    reason: "expected Maximize or Minimize".into(),
                })
            }
            Section::Objective => objective.extend(tokens.into_iter().map(|t| (t, line_no))),
            Section::Rows => rows.extend(tokens.into_iter().map(|t| (t, line_no))),
            Section::Bounds => bound_lines.push((tokens, line_no)),
            Section::Binary => {
                for t in tokens {
                    match t {
                        Token::Name(n) => binary_names.push((n, line_no)),
                        _ => {
                            return Err(Error::Parse {
                                line: line_no,
                                reason: "expected variable names".into(),
                            })
                        }
                    }
                }
            }
            Section::End => {
                return Err(Error::Parse {
                    line: line_no,
                    reason: "content after End".into(),
                })
            }
        }
    }
    if section != Section::End {
        return Err(Error::Parse {
            line: text.lines().count(),
            reason: "missing End".into(),
        });
    }

    // columns are numbered in Bounds order, then Binary, then first use
    for (tokens, line) in &bound_lines {
        parse_bound_line(tokens, *line, &mut builder)?;
    }
    let mut binaries = Vec::new();
    for (name, _) in &binary_names {
        let j = builder.column(name);
        if !builder.touched[j] {
            builder.lp.set_bounds(j, 0.0, 1.0);
        }
        binaries.push(j);
    }

    let mut pos = 0;
    skip_label(&objective, &mut pos);
    let obj = parse_terms(&objective, &mut pos, &mut builder)?;
    if let Some((_, line)) = objective.get(pos) {
        return Err(Error::Parse {
            line: *line,
            reason: "relation in objective".into(),
        });
    }

    let mut constraints = Vec::new();
    let mut pos = 0;
    while pos < rows.len() {
        skip_label(&rows, &mut pos);
        let terms = parse_terms(&rows, &mut pos, &mut builder)?;
        let line = rows.get(pos).map_or(0, |t| t.1);
        let Some((Token::Rel(rel), _)) = rows.get(pos) else {
            return Err(Error::Parse {
                line,
                reason: "row without a relation".into(),
            });
        };
        pos += 1;
        let toks: Vec<Token> = rows[pos..].iter().map(|t| t.0.clone()).collect();
        let mut k = 0;
        let rhs = signed_number(&toks, &mut k).ok_or(Error::Parse {
            line,
            reason: "row without a right-hand side".into(),
        })?;
        pos += k;
        constraints.push(Constraint::new(terms, *rel, rhs));
    }

    let mut lp = builder.lp;
    for (j, c) in obj {
        lp.set_objective(j, c);
    }
    for c in constraints {
        lp.add_constraint(c)?;
    }
    let names = lp.names().to_vec();
    let binaries = binaries
        .into_iter()
        .map(|j| (node_of(&names[j]), j))
        .collect();
    Ok(MilpModel {
        lp,
        binaries,
        map: None,
    })
}

/// `delta_{layer}_{node}` names back to a node id (layer as written); other
/// names map to `(0, 0)`.
fn node_of(name: &str) -> NodeId {
    let mut parts = name.strip_prefix("delta_").unwrap_or("").split('_');
    match (
        parts.next().and_then(|p| p.parse().ok()),
        parts.next().and_then(|p| p.parse().ok()),
    ) {
        (Some(l), Some(n)) => NodeId::new(l, n),
        _ => NodeId::new(0, 0),
    }
}
