//! Free-format MPS writer and reader, plus "name value" solution files.
//!
//! The objective row is named `obj`. Its constant is stored as the negated
//! RHS entry of that row, so the objective reads `c·x - rhs_obj`, the
//! convention used by most MILP solvers. Binaries are written as integer
//! columns bounded to `[0, 1]` and read back as binaries. All numbers use
//! 17 significant digits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::milp::{Constraint, LinExpr, MilpModel, Sense, VarId, VarKind, Variable};

const OBJECTIVE_ROW: &str = "obj";
const BOUND_TOL: f64 = 1e-6;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_name(name: &str, seen: &mut HashSet<String>) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) || name == OBJECTIVE_ROW || name.starts_with('$') {
        return Err(Error::InvalidArgument(format!("name `{name}` cannot be written to MPS")));
    }
    if !seen.insert(name.to_string()) {
        return Err(Error::InvalidArgument(format!("duplicate name `{name}` in model")));
    }
    Ok(())
}

/// Renders the model as free-format MPS text.
pub fn write_mps(model: &MilpModel) -> Result<String> {
    model.validate()?;
    let mut seen = HashSet::new();
    for v in &model.vars {
        check_name(&v.name, &mut seen)?;
    }
    let mut seen = HashSet::new();
    for c in &model.constraints {
        check_name(&c.name, &mut seen)?;
    }

    // Column-major entries, keeping every row's coefficient order.
    let mut columns: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.vars.len()];
    for (v, c) in model.objective.normalized().terms {
        columns[v.0].push((OBJECTIVE_ROW, c));
    }
    for row in &model.constraints {
        for &(v, c) in &row.coeffs {
            columns[v.0].push((row.name.as_str(), c));
        }
    }

    let mut out = String::new();
    out.push_str("NAME cfrec\nROWS\n");
    let _ = writeln!(out, " N {OBJECTIVE_ROW}");
    for row in &model.constraints {
        let tag = match row.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {tag} {}", row.name);
    }
    out.push_str("COLUMNS\n");
    let mut in_integer_block = false;
    let mut marker = 0;
    for (k, var) in model.vars.iter().enumerate() {
        let integral = var.kind.is_integral();
        if integral != in_integer_block {
            let kind = if integral { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, " MARKER{marker} 'MARKER' {kind}");
            marker += 1;
            in_integer_block = integral;
        }
        if columns[k].is_empty() {
            let _ = writeln!(out, " {} {OBJECTIVE_ROW} {}", var.name, num(0.0));
        }
        for &(row, c) in &columns[k] {
            let _ = writeln!(out, " {} {row} {}", var.name, num(c));
        }
    }
    if in_integer_block {
        let _ = writeln!(out, " MARKER{marker} 'MARKER' 'INTEND'");
    }
    out.push_str("RHS\n");
    if model.objective.constant != 0.0 {
        let _ = writeln!(out, " RHS {OBJECTIVE_ROW} {}", num(-model.objective.constant));
    }
    for row in &model.constraints {
        if row.rhs != 0.0 {
            let _ = writeln!(out, " RHS {} {}", row.name, num(row.rhs));
        }
    }
    out.push_str("RANGES\nBOUNDS\n");
    for var in &model.vars {
        if var.lower == var.upper {
            let _ = writeln!(out, " FX BND {} {}", var.name, num(var.lower));
        } else {
            let _ = writeln!(out, " LO BND {} {}", var.name, num(var.lower));
            let _ = writeln!(out, " UP BND {} {}", var.name, num(var.upper));
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

pub fn export_mps(model: &MilpModel, path: &Path) -> Result<()> {
    let text = write_mps(model)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

/// Parses free-format MPS text. Rows carrying a RANGES entry become two
/// one-sided rows named `<row>` and `<row>_range`.
pub fn parse_mps(text: &str, origin: &Path) -> Result<MilpModel> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut section = Section::None;
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Constraint> = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut vars: Vec<Variable> = Vec::new();
    let mut objective = LinExpr::default();
    let mut integer_block = false;
    let mut explicit_upper: HashSet<usize> = HashSet::new();
    let mut ranges: BTreeMap<usize, f64> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !raw.starts_with(char::is_whitespace) {
            section = match fields[0] {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                "OBJSENSE" if fields.get(1).is_none_or(|s| *s == "MIN" || *s == "MINIMIZE") => Section::None,
                other => return Err(err(line_no, format!("unsupported section `{other}`"))),
            };
            continue;
        }
        let number = |s: &str| s.parse::<f64>().map_err(|_| err(line_no, format!("bad number `{s}`")));
        match section {
            Section::Rows => {
                let [kind, name] = fields[..] else {
                    return Err(err(line_no, "expected `<type> <name>`".into()));
                };
                let sense = match kind {
                    "N" => {
                        if objective_row.is_none() {
                            objective_row = Some(name.to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(err(line_no, format!("unknown row type `{other}`"))),
                };
                if row_index.insert(name.to_string(), rows.len()).is_some() {
                    return Err(err(line_no, format!("duplicate row `{name}`")));
                }
                rows.push(Constraint {
                    name: name.to_string(),
                    coeffs: Vec::new(),
                    sense,
                    rhs: 0.0,
                });
            }
            Section::Columns => {
                if fields.get(1) == Some(&"'MARKER'") {
                    match fields.get(2) {
                        Some(&"'INTORG'") => integer_block = true,
                        Some(&"'INTEND'") => integer_block = false,
                        _ => return Err(err(line_no, "bad marker".into())),
                    }
                    continue;
                }
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(err(line_no, "expected `<column> <row> <value> [<row> <value>]`".into()));
                }
                let name = fields[0];
                let k = *var_index.entry(name.to_string()).or_insert_with(|| {
                    vars.push(Variable {
                        name: name.to_string(),
                        kind: if integer_block { VarKind::Integer } else { VarKind::Continuous },
                        lower: 0.0,
                        upper: f64::INFINITY,
                        branch_priority: 0,
                    });
                    vars.len() - 1
                });
                for pair in fields[1..].chunks(2) {
                    let value = number(pair[1])?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        objective.add_term(VarId(k), value);
                    } else if let Some(&r) = row_index.get(pair[0]) {
                        rows[r].coeffs.push((VarId(k), value));
                    } else {
                        return Err(err(line_no, format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let pairs = match fields.len() {
                    2 => &fields[..],
                    3 | 5 => &fields[1..],
                    _ => return Err(err(line_no, "expected `[<set>] <row> <value>`".into())),
                };
                for pair in pairs.chunks(2) {
                    let value = number(pair[1])?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        if section == Section::Rhs {
                            objective.constant = -value;
                        }
                    } else if let Some(&r) = row_index.get(pair[0]) {
                        if section == Section::Rhs {
                            rows[r].rhs = value;
                        } else {
                            ranges.insert(r, value);
                        }
                    } else {
                        return Err(err(line_no, format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Bounds => {
                let (kind, name, value) = match fields[..] {
                    [kind, _, name, value] => (kind, name, Some(number(value)?)),
                    [kind, _, name] => (kind, name, None),
                    _ => return Err(err(line_no, "expected `<type> <set> <column> [<value>]`".into())),
                };
                let &k = var_index
                    .get(name)
                    .ok_or_else(|| err(line_no, format!("unknown column `{name}`")))?;
                let need = || value.ok_or_else(|| err(line_no, format!("bound `{kind}` needs a value")));
                let var = &mut vars[k];
                match kind {
                    "LO" | "LI" => var.lower = need()?,
                    "UP" | "UI" => {
                        var.upper = need()?;
                        explicit_upper.insert(k);
                    }
                    "FX" => {
                        var.lower = need()?;
                        var.upper = var.lower;
                        explicit_upper.insert(k);
                    }
                    "BV" => {
                        var.kind = VarKind::Integer;
                        var.lower = 0.0;
                        var.upper = 1.0;
                        explicit_upper.insert(k);
                    }
                    "MI" => var.lower = f64::NEG_INFINITY,
                    "PL" => var.upper = f64::INFINITY,
                    "FR" => {
                        var.lower = f64::NEG_INFINITY;
                        var.upper = f64::INFINITY;
                    }
                    other => return Err(err(line_no, format!("unknown bound type `{other}`"))),
                }
            }
            Section::None => return Err(err(line_no, "data outside a section".into())),
        }
    }

    for (k, var) in vars.iter_mut().enumerate() {
        if var.kind == VarKind::Integer && !explicit_upper.contains(&k) && var.upper.is_infinite() {
            // Conventional default for integer columns without an upper bound.
            var.upper = 1.0;
        }
        if var.kind == VarKind::Integer && var.lower == 0.0 && var.upper == 1.0 {
            var.kind = VarKind::Binary;
        }
    }
    let mut extra = Vec::new();
    for (&r, &range) in &ranges {
        let row = &mut rows[r];
        let (lo, hi) = match row.sense {
            Sense::Le => (row.rhs - range.abs(), row.rhs),
            Sense::Ge => (row.rhs, row.rhs + range.abs()),
            Sense::Eq if range >= 0.0 => (row.rhs, row.rhs + range),
            Sense::Eq => (row.rhs + range, row.rhs),
        };
        row.sense = Sense::Ge;
        row.rhs = lo;
        extra.push(Constraint {
            name: format!("{}_range", row.name),
            coeffs: row.coeffs.clone(),
            sense: Sense::Le,
            rhs: hi,
        });
    }
    rows.extend(extra);
    Ok(MilpModel {
        vars,
        constraints: rows,
        objective,
        roles: Default::default(),
    })
}

pub fn import_mps(path: &Path) -> Result<MilpModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mps(&text, path)
}

/// Parses "name value" lines into values indexed like `model.vars`,
/// checking completeness, bounds and integrality within 1e-6.
pub fn parse_solution(text: &str, model: &MilpModel, origin: &Path) -> Result<Vec<f64>> {
    let mut found: HashMap<&str, f64> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: "expected `name value`".into(),
            });
        };
        let value: f64 = value.parse().map_err(|_| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message: format!("bad number `{value}`"),
        })?;
        found.insert(name, value);
    }
    let mut values = Vec::with_capacity(model.vars.len());
    for var in &model.vars {
        let Some(&v) = found.get(var.name.as_str()) else {
            return Err(Error::Solution(format!("solution is missing variable {}", var.name)));
        };
        if v < var.lower - BOUND_TOL || v > var.upper + BOUND_TOL {
            return Err(Error::Solution(format!(
                "value {v} for {} lies outside [{}, {}]",
                var.name, var.lower, var.upper
            )));
        }
        if var.kind.is_integral() && (v - v.round()).abs() > BOUND_TOL {
            return Err(Error::Solution(format!("value {v} for integer variable {} is fractional", var.name)));
        }
        values.push(v);
    }
    Ok(values)
}

pub fn import_solution(path: &Path, model: &MilpModel) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_solution(&text, model, path)
}

/// Renders values as "name value" lines.
pub fn write_solution(model: &MilpModel, values: &[f64]) -> String {
    let mut out = String::new();
    for (var, v) in model.vars.iter().zip(values) {
        let _ = writeln!(out, "{} {}", var.name, num(*v));
    }
    out
}
