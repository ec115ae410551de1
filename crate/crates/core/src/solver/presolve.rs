//! Node-level bound propagation and reduction of a [`MilpModel`] to an
//! [`LpProblem`] over its unfixed variables.

use crate::milp::{MilpModel, Sense};

use super::lp::{LpProblem, LpRow};

const FIXED_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-6;

/// Rows as `≤` forms: each yields `(sign, rhs)` pairs such that
/// `sign * (a·x) <= sign * rhs`.
fn le_forms(sense: Sense) -> &'static [f64] {
    match sense {
        Sense::Le => &[1.0],
        Sense::Ge => &[-1.0],
        Sense::Eq => &[1.0, -1.0],
    }
}

/// Tightens integer bounds implied by the rows. Returns `false` when the
/// node is proven infeasible.
pub(crate) fn propagate(model: &MilpModel, lb: &mut [f64], ub: &mut [f64], max_passes: usize) -> bool {
    for (k, v) in model.vars.iter().enumerate() {
        if v.kind.is_integral() {
            lb[k] = (lb[k] - FEAS_TOL).ceil();
            ub[k] = (ub[k] + FEAS_TOL).floor();
        }
        if lb[k] > ub[k] + FIXED_TOL {
            return false;
        }
    }
    for _ in 0..max_passes {
        let mut changed = false;
        for row in &model.constraints {
            for &sign in le_forms(row.sense) {
                let rhs = sign * row.rhs;
                let mut minact = 0.0;
                for &(v, c) in &row.coeffs {
                    let a = sign * c;
                    minact += if a > 0.0 { a * lb[v.0] } else { a * ub[v.0] };
                }
                if minact > rhs + FEAS_TOL * (1.0 + rhs.abs()) {
                    return false;
                }
                for &(v, c) in &row.coeffs {
                    let k = v.0;
                    if !model.vars[k].kind.is_integral() || ub[k] - lb[k] < 0.5 {
                        continue;
                    }
                    let a = sign * c;
                    if a.abs() < 1e-12 {
                        continue;
                    }
                    let own = if a > 0.0 { a * lb[k] } else { a * ub[k] };
                    let residual = rhs - (minact - own);
                    let implied = residual / a;
                    if a > 0.0 {
                        let nb = (implied + FEAS_TOL).floor();
                        if nb < ub[k] {
                            ub[k] = nb;
                            changed = true;
                        }
                    } else {
                        let nb = (implied - FEAS_TOL).ceil();
                        if nb > lb[k] {
                            lb[k] = nb;
                            changed = true;
                        }
                    }
                    if lb[k] > ub[k] + FIXED_TOL {
                        return false;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    true
}

/// LP over the unfixed columns of a node.
pub(crate) struct ReducedLp {
    pub lp: LpProblem,
    /// Original variable index of every LP column.
    pub columns: Vec<usize>,
    /// Full-length vector holding the fixed values (free entries are 0).
    pub base: Vec<f64>,
    pub objective_offset: f64,
}

impl ReducedLp {
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        for (col, &orig) in self.columns.iter().enumerate() {
            full[orig] = x[col];
        }
        full
    }
}

/// Removes fixed variables and rows left empty or redundant under the node
/// bounds. With `tighten`, big-M style coefficients on binaries are shrunk to
/// the smallest value that keeps the row equivalent on integer points.
pub(crate) fn reduce(model: &MilpModel, lb: &[f64], ub: &[f64], tighten: bool) -> Option<ReducedLp> {
    let n = model.vars.len();
    let mut column_of = vec![usize::MAX; n];
    let mut columns = Vec::new();
    let mut base = vec![0.0; n];
    for k in 0..n {
        if ub[k] - lb[k] <= FIXED_TOL {
            base[k] = if model.vars[k].kind.is_integral() { lb[k].round() } else { lb[k] };
        } else {
            column_of[k] = columns.len();
            columns.push(k);
        }
    }
    let mut lp = LpProblem {
        costs: vec![0.0; columns.len()],
        lower: columns.iter().map(|&k| lb[k]).collect(),
        upper: columns.iter().map(|&k| ub[k]).collect(),
        rows: Vec::new(),
    };
    let mut offset = model.objective.constant;
    for &(v, c) in &model.objective.terms {
        if column_of[v.0] == usize::MAX {
            offset += c * base[v.0];
        } else {
            lp.costs[column_of[v.0]] += c;
        }
    }

    for row in &model.constraints {
        let mut rhs = row.rhs;
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
        for &(v, c) in &row.coeffs {
            let col = column_of[v.0];
            if col == usize::MAX {
                rhs -= c * base[v.0];
            } else if c != 0.0 {
                coeffs.push((col, c));
            }
        }
        let tol = FEAS_TOL * (1.0 + rhs.abs());
        let (mut minact, mut maxact) = (0.0, 0.0);
        for &(col, c) in &coeffs {
            let (l, u) = (lp.lower[col], lp.upper[col]);
            if c > 0.0 {
                minact += c * l;
                maxact += c * u;
            } else {
                minact += c * u;
                maxact += c * l;
            }
        }
        match row.sense {
            Sense::Le => {
                if minact > rhs + tol {
                    return None;
                }
                if maxact <= rhs + 1e-9 {
                    continue;
                }
            }
            Sense::Ge => {
                if maxact < rhs - tol {
                    return None;
                }
                if minact >= rhs - 1e-9 {
                    continue;
                }
            }
            Sense::Eq => {
                if minact > rhs + tol || maxact < rhs - tol {
                    return None;
                }
                if coeffs.is_empty() {
                    continue;
                }
            }
        }
        if tighten && row.sense != Sense::Eq {
            // Work on the ≤ form.
            let sign = if row.sense == Sense::Le { 1.0 } else { -1.0 };
            let mut b = sign * rhs;
            let mut a: Vec<(usize, f64)> = coeffs.iter().map(|&(c, v)| (c, sign * v)).collect();
            let mut max_le = if sign > 0.0 { maxact } else { -minact };
            for entry in a.iter_mut() {
                let (col, coef) = *entry;
                let orig = columns[col];
                let is_binary = model.vars[orig].kind.is_integral() && lp.lower[col] == 0.0 && lp.upper[col] == 1.0;
                if !is_binary || max_le <= b {
                    continue;
                }
                if coef > 0.0 && max_le - coef < b {
                    let d = b - (max_le - coef);
                    entry.1 = coef - d;
                    b -= d;
                    max_le -= d;
                } else if coef < 0.0 && max_le + coef < b {
                    let d = b - (max_le + coef);
                    entry.1 = coef + d;
                }
            }
            coeffs = a;
            rhs = b;
            lp.rows.push(LpRow {
                coeffs,
                sense: Sense::Le,
                rhs,
            });
        } else {
            lp.rows.push(LpRow {
                coeffs,
                sense: row.sense,
                rhs,
            });
        }
    }
    Some(ReducedLp {
        lp,
        columns,
        base,
        objective_offset: offset,
    })
}
