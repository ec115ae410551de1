//! Solver-agnostic mixed-integer linear model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mio::VarRoles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    /// Higher values are branched on first.
    pub branch_priority: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Affine expression `constant + Σ coef·var`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        LinExpr {
            terms: vec![(var, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: VarId, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
        self
    }

    /// `self + scale * other`.
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.add_term(v, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Merges duplicate variables and drops zero coefficients.
    pub fn normalized(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        LinExpr {
            terms: merged,
            constant: self.constant,
        }
    }
}

/// Minimization model with typed, bounded variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: LinExpr,
    pub roles: VarRoles,
}

impl MilpModel {
    pub fn new() -> Self {
        MilpModel::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
            branch_priority: 0,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn var_mut(&mut self, id: VarId) -> &mut Variable {
        &mut self.vars[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    /// Adds `expr sense rhs`, moving the expression's constant to the right.
    pub fn add_constraint(&mut self, name: impl Into<String>, expr: &LinExpr, sense: Sense, rhs: f64) -> usize {
        let e = expr.normalized();
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs: e.terms,
            sense,
            rhs: rhs - e.constant,
        });
        self.constraints.len() - 1
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.eval(values)
    }

    pub fn is_pure_lp(&self) -> bool {
        self.vars.iter().all(|v| !v.kind.is_integral())
    }

    /// Checks the structural invariants: declared variables, finite data,
    /// binaries inside `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        for v in &self.vars {
            if !v.lower.is_finite() || !v.upper.is_finite() {
                return Err(Error::InvalidArgument(format!("variable `{}` has an infinite bound", v.name)));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::InvalidArgument(format!("binary `{}` bounds exceed [0, 1]", v.name)));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!("row `{}` has a non-finite rhs", c.name)));
            }
            for &(v, coef) in &c.coeffs {
                if v.0 >= n || !coef.is_finite() {
                    return Err(Error::InvalidArgument(format!("row `{}` has a bad coefficient", c.name)));
                }
            }
        }
        for &(v, coef) in &self.objective.terms {
            if v.0 >= n || !coef.is_finite() {
                return Err(Error::InvalidArgument("objective has a bad coefficient".into()));
            }
        }
        Ok(())
    }

    /// Largest violation of any row, bound, or integrality requirement.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(values)).fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| {
                let b = (v.lower - x).max(x - v.upper).max(0.0);
                let i = if v.kind.is_integral() { (x - x.round()).abs() } else { 0.0 };
                b.max(i)
            })
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}
