//! Dense-tableau primal simplex for box-bounded variables.
//!
//! Every structural column has finite bounds; each inequality row gets a
//! non-negative slack, and rows whose slack cannot absorb the starting
//! residual get an artificial column driven out in phase 1.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::milp::Sense;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const DEGENERATE_STALL: usize = 50;
const REFACTOR_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min costs·x` subject to rows and `lower <= x <= upper`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub costs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LpOptions {
    /// Use Bland's rule from the first pivot.
    pub bland: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau<'a> {
    problem: &'a LpProblem,
    m: usize,
    /// Total columns: structurals, slacks, artificials.
    cols: usize,
    first_artificial: usize,
    /// Dense column data of the original system `[A | S | R]`.
    column_entries: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    status: Vec<Status>,
    /// Value of every column (basic ones mirrored from `xb`).
    value: Vec<f64>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    /// Row-major `m x cols` of `B⁻¹[A | S | R]`.
    t: Vec<f64>,
    costs: Vec<f64>,
    d: Vec<f64>,
    bland: bool,
    pivots_since_refactor: usize,
}

pub fn solve(problem: &LpProblem, options: LpOptions) -> Result<LpOutcome> {
    let n = problem.costs.len();
    if problem.lower.len() != n || problem.upper.len() != n {
        return Err(Error::InvalidArgument("bound vectors differ in length from costs".into()));
    }
    for j in 0..n {
        if !problem.lower[j].is_finite() || !problem.upper[j].is_finite() {
            return Err(Error::InvalidArgument(format!("column {j} has an infinite bound")));
        }
        if problem.lower[j] > problem.upper[j] + 1e-9 {
            return Ok(LpOutcome::Infeasible);
        }
    }
    let mut tab = Tableau::new(problem, options);
    // Phase 1.
    let phase1: Vec<f64> = (0..tab.cols)
        .map(|j| if j >= tab.first_artificial { 1.0 } else { 0.0 })
        .collect();
    if tab.first_artificial < tab.cols {
        tab.set_costs(phase1);
        if !tab.iterate()? {
            return Err(Error::Numerical("phase 1 reported unbounded".into()));
        }
        tab.refactor()?;
        let infeasibility: f64 = (tab.first_artificial..tab.cols).map(|j| tab.value[j].abs()).sum();
        let scale = 1.0 + problem.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if infeasibility > PHASE1_TOL * scale {
            return Ok(LpOutcome::Infeasible);
        }
        tab.retire_artificials();
    }
    // Phase 2.
    let mut phase2 = vec![0.0; tab.cols];
    phase2[..n].copy_from_slice(&problem.costs);
    tab.set_costs(phase2);
    if !tab.iterate()? {
        return Ok(LpOutcome::Unbounded);
    }
    tab.refactor()?;
    let x: Vec<f64> = (0..n)
        .map(|j| tab.value[j].clamp(problem.lower[j], problem.upper[j]))
        .collect();
    for (i, row) in problem.rows.iter().enumerate() {
        let a: f64 = row.coeffs.iter().map(|&(j, c)| c * x[j]).sum();
        let viol = match row.sense {
            Sense::Le => a - row.rhs,
            Sense::Ge => row.rhs - a,
            Sense::Eq => (a - row.rhs).abs(),
        };
        if viol > 1e-7 * (1.0 + row.rhs.abs()) {
            return Err(Error::Numerical(format!("row {i} violated by {viol:e} after refactorization")));
        }
    }
    let objective = problem.costs.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal { x, objective })
}

impl<'a> Tableau<'a> {
    fn new(problem: &'a LpProblem, options: LpOptions) -> Self {
        let n = problem.costs.len();
        let m = problem.rows.len();
        let mut column_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in problem.rows.iter().enumerate() {
            for &(j, c) in &row.coeffs {
                if c != 0.0 {
                    column_entries[j].push((i, c));
                }
            }
        }
        let mut lo = problem.lower.clone();
        let mut hi = problem.upper.clone();
        let mut value = lo.clone();
        let mut status = vec![Status::AtLower; n];

        let residual: Vec<f64> = problem
            .rows
            .iter()
            .map(|r| r.rhs - r.coeffs.iter().map(|&(j, c)| c * value[j]).sum::<f64>())
            .collect();

        let mut basis = vec![usize::MAX; m];
        let mut basic_coef = vec![0.0; m];
        // Slacks.
        for (i, row) in problem.rows.iter().enumerate() {
            let coef = match row.sense {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
                Sense::Eq => continue,
            };
            let j = column_entries.len();
            column_entries.push(vec![(i, coef)]);
            lo.push(0.0);
            hi.push(f64::INFINITY);
            let slack_value = residual[i] / coef;
            if slack_value >= 0.0 {
                basis[i] = j;
                basic_coef[i] = coef;
                value.push(slack_value);
                status.push(Status::Basic);
            } else {
                value.push(0.0);
                status.push(Status::AtLower);
            }
        }
        let first_artificial = column_entries.len();
        for i in 0..m {
            if basis[i] != usize::MAX {
                continue;
            }
            let coef = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
            let j = column_entries.len();
            column_entries.push(vec![(i, coef)]);
            lo.push(0.0);
            hi.push(f64::INFINITY);
            value.push(residual[i].abs());
            status.push(Status::Basic);
            basis[i] = j;
            basic_coef[i] = coef;
        }
        let cols = column_entries.len();
        let mut t = vec![0.0; m * cols];
        for (j, entries) in column_entries.iter().enumerate() {
            for &(i, c) in entries {
                t[i * cols + j] = c / basic_coef[i];
            }
        }
        let xb = basis.iter().map(|&j| value[j]).collect();
        Tableau {
            problem,
            m,
            cols,
            first_artificial,
            column_entries,
            lo,
            hi,
            status,
            value,
            basis,
            xb,
            t,
            costs: vec![0.0; cols],
            d: vec![0.0; cols],
            bland: options.bland,
            pivots_since_refactor: 0,
        }
    }

    fn set_costs(&mut self, costs: Vec<f64>) {
        self.costs = costs;
        self.recompute_reduced_costs();
    }

    fn recompute_reduced_costs(&mut self) {
        let cols = self.cols;
        let mut d = self.costs.clone();
        for i in 0..self.m {
            let cb = self.costs[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * cols..(i + 1) * cols];
                for (dj, tij) in d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for &j in &self.basis {
            d[j] = 0.0;
        }
        self.d = d;
    }

    fn entering(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if self.hi[j] - self.lo[j] <= 0.0 {
                continue;
            }
            let dj = self.d[j];
            let eligible = match self.status[j] {
                Status::AtLower => dj < -COST_TOL,
                Status::AtUpper => dj > COST_TOL,
                Status::Basic => false,
            };
            if !eligible {
                continue;
            }
            if self.bland {
                return Some(j);
            }
            if best.is_none_or(|(_, b)| dj.abs() > b) {
                best = Some((j, dj.abs()));
            }
        }
        best.map(|b| b.0)
    }

    /// Runs pivots until optimal (`true`) or unbounded (`false`).
    fn iterate(&mut self) -> Result<bool> {
        let limit = 50 * (self.m + self.cols) + 1000;
        let mut degenerate_run = 0;
        for _ in 0..limit {
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let Some(q) = self.entering() else {
                return Ok(true);
            };
            let dir = if self.status[q] == Status::AtLower { 1.0 } else { -1.0 };
            let cols = self.cols;

            let mut theta = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_alpha = 0.0;
            for i in 0..self.m {
                let alpha = self.t[i * cols + q];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                // Basic value moves by -alpha * dir per unit step.
                let rate = -alpha * dir;
                let (limit, to_upper) = if rate < 0.0 {
                    (((self.xb[i] - self.lo[b]) / -rate).max(0.0), false)
                } else if self.hi[b].is_finite() {
                    (((self.hi[b] - self.xb[i]) / rate).max(0.0), true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < theta,
                    Some((r, _)) => {
                        if limit < theta - 1e-12 {
                            true
                        } else if limit <= theta + 1e-12 {
                            if self.bland {
                                b < self.basis[r]
                            } else {
                                alpha.abs() > leave_alpha
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = limit.min(theta);
                    leave = Some((i, to_upper));
                    leave_alpha = alpha.abs();
                }
            }
            if !theta.is_finite() {
                return Ok(false);
            }
            if theta < 1e-12 {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_STALL {
                    self.bland = true;
                }
            } else {
                degenerate_run = 0;
            }

            let step = dir * theta;
            for i in 0..self.m {
                let alpha = self.t[i * cols + q];
                if alpha != 0.0 {
                    self.xb[i] -= alpha * step;
                }
            }
            match leave {
                None => {
                    self.status[q] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                    self.value[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    self.status[out] = if to_upper { Status::AtUpper } else { Status::AtLower };
                    self.value[out] = if to_upper { self.hi[out] } else { self.lo[out] };
                    let entering_value = self.value[q] + step;
                    self.pivot(r, q);
                    self.xb[r] = entering_value;
                    self.value[q] = entering_value;
                }
            }
            for (i, &b) in self.basis.iter().enumerate() {
                self.value[b] = self.xb[i];
            }
        }
        Err(Error::Numerical("simplex iteration limit reached".into()))
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let piv = self.t[r * cols + q];
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= piv;
            }
        }
        let pivot_row: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        let nz: Vec<usize> = (0..cols).filter(|&j| pivot_row[j] != 0.0).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * cols..(i + 1) * cols];
            for &j in &nz {
                row[j] -= f * pivot_row[j];
            }
            row[q] = 0.0;
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for &j in &nz {
                self.d[j] -= dq * pivot_row[j];
            }
            self.d[q] = 0.0;
        }
        let out = self.basis[r];
        self.basis[r] = q;
        self.status[q] = Status::Basic;
        debug_assert_ne!(self.status[out], Status::Basic);
        self.pivots_since_refactor += 1;
    }

    /// Rebuilds `B⁻¹[A | S | R]` and basic values from the original data.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        if m == 0 {
            self.pivots_since_refactor = 0;
            return Ok(());
        }
        let cols = self.cols;
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, c) in &self.column_entries[j] {
                bmat[(i, k)] = c;
            }
        }
        let mut full = DMatrix::<f64>::zeros(m, cols + 1);
        for (j, entries) in self.column_entries.iter().enumerate() {
            for &(i, c) in entries {
                full[(i, j)] = c;
            }
        }
        // Last column: b - N x_N.
        for (i, row) in self.problem.rows.iter().enumerate() {
            full[(i, cols)] = row.rhs;
        }
        for j in 0..cols {
            if self.status[j] != Status::Basic && self.value[j] != 0.0 {
                for &(i, c) in &self.column_entries[j] {
                    full[(i, cols)] -= c * self.value[j];
                }
            }
        }
        let lu = bmat.lu();
        let solved = lu
            .solve(&full)
            .ok_or_else(|| Error::Numerical("singular basis during refactorization".into()))?;
        if solved.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite values after refactorization".into()));
        }
        for i in 0..m {
            for j in 0..cols {
                let v = solved[(i, j)];
                self.t[i * cols + j] = if v.abs() < 1e-13 { 0.0 } else { v };
            }
            self.xb[i] = solved[(i, cols)];
            self.value[self.basis[i]] = self.xb[i];
        }
        self.pivots_since_refactor = 0;
        self.recompute_reduced_costs();
        Ok(())
    }

    /// Pins artificials to zero and pivots basic ones out where possible.
    fn retire_artificials(&mut self) {
        for j in self.first_artificial..self.cols {
            self.hi[j] = 0.0;
            if self.status[j] != Status::Basic {
                self.status[j] = Status::AtLower;
                self.value[j] = 0.0;
            }
        }
        let cols = self.cols;
        for r in 0..self.m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let candidate = (0..self.first_artificial)
                .filter(|&j| self.status[j] != Status::Basic && self.hi[j] > self.lo[j])
                .max_by(|&a, &b| self.t[r * cols + a].abs().total_cmp(&self.t[r * cols + b].abs()));
            if let Some(q) = candidate {
                if self.t[r * cols + q].abs() > 1e-7 {
                    let out = self.basis[r];
                    let entering_value = self.value[q];
                    self.status[out] = Status::AtLower;
                    self.value[out] = 0.0;
                    self.pivot(r, q);
                    // Degenerate pivot: the entering column keeps its value.
                    self.xb[r] = entering_value;
                }
            }
        }
        for i in 0..self.m {
            let b = self.basis[i];
            if b >= self.first_artificial {
                self.xb[i] = 0.0;
            }
            self.value[b] = self.xb[i];
        }
    }
}
