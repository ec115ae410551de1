//! Embedded LP and branch-and-bound MILP solver plus MPS interchange.

mod bnb;
pub mod lp;
pub mod mps;
mod presolve;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::milp::MilpModel;

pub use lp::{LpOptions, LpOutcome, LpProblem, LpRow};
pub use mps::{export_mps, import_mps, import_solution, write_mps};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveLimits {
    pub time_limit_seconds: f64,
    pub absolute_gap: f64,
    pub relative_gap: f64,
    /// Stop after this many nodes (`None`: unlimited).
    pub node_limit: Option<u64>,
    /// Record the global bound after every node.
    pub record_bound_trace: bool,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            time_limit_seconds: 600.0,
            absolute_gap: 1e-6,
            relative_gap: 1e-6,
            node_limit: None,
            record_bound_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// A feasible point was found but optimality is not proven.
    Feasible,
    Infeasible,
    /// The limit was reached before any feasible point was found.
    NoSolutionTimeLimit,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Variable values indexed like the model (empty without a solution).
    pub values: Vec<f64>,
    /// NaN without a solution.
    pub objective: f64,
    /// +inf when infeasible.
    pub best_bound: f64,
    pub nodes_explored: u64,
    pub wall_seconds: f64,
    pub bound_trace: Vec<f64>,
}

/// Solves the model to proven optimality within the limits.
pub fn solve(model: &MilpModel, limits: &SolveLimits) -> Result<MilpSolution> {
    model.validate()?;
    Ok(bnb::branch_and_bound(model, limits))
}

/// Solves the continuous relaxation (integrality dropped).
pub fn solve_relaxation(model: &MilpModel) -> Result<LpOutcome> {
    model.validate()?;
    let lb: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let ub: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    let Some(reduced) = presolve::reduce(model, &lb, &ub, false) else {
        return Ok(LpOutcome::Infeasible);
    };
    let outcome = match lp::solve(&reduced.lp, LpOptions::default()) {
        Ok(o) => o,
        Err(_) => lp::solve(&reduced.lp, LpOptions { bland: true })?,
    };
    Ok(match outcome {
        LpOutcome::Optimal { x, objective } => LpOutcome::Optimal {
            x: reduced.expand(&x),
            objective: objective + reduced.objective_offset,
        },
        other => other,
    })
}
