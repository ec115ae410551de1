//! Best-first branch and bound with depth-first dives.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use web_time::Instant;

use crate::milp::MilpModel;

use super::lp::{self, LpOptions, LpOutcome};
use super::presolve::{propagate, reduce};
use super::{MilpSolution, SolveLimits, SolveStatus};

const INT_TOL: f64 = 1e-6;
const ACCEPT_TOL: f64 = 1e-6;
const PROPAGATION_PASSES: usize = 4;

struct Node {
    bound: f64,
    depth: u32,
    id: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// LP point of the parent, reused when it lies inside this node's box.
    hint: Option<Vec<f64>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: the "greatest" node is the one with the
    // smallest bound, then the deepest, then the oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// Step by which every integral objective value differs, when the objective
/// only involves integer variables with commensurable coefficients.
fn objective_step(model: &MilpModel) -> Option<f64> {
    let obj = model.objective.normalized();
    let mut coefs = Vec::with_capacity(obj.terms.len());
    for &(v, c) in &obj.terms {
        if !model.vars[v.0].kind.is_integral() {
            return None;
        }
        if c != 0.0 {
            coefs.push(c.abs());
        }
    }
    if coefs.is_empty() {
        return None;
    }
    if coefs.iter().all(|c| (c - c.round()).abs() < 1e-9 && *c < 1e12) {
        let g = coefs.iter().fold(0u64, |g, &c| gcd(g, c.round() as u64));
        return Some(g as f64);
    }
    let step = coefs.iter().copied().fold(f64::INFINITY, f64::min);
    coefs
        .iter()
        .all(|c| {
            let ratio = c / step;
            (ratio - ratio.round()).abs() <= 1e-9
        })
        .then_some(step)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn round_bound(bound: f64, step: Option<f64>, constant: f64) -> f64 {
    match step {
        Some(s) => {
            let k = ((bound - constant) / s - 1e-6).ceil();
            (constant + k * s).max(bound)
        }
        None => bound,
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    limits: &'a SolveLimits,
    /// Integer variables ordered by descending branch priority, then index.
    integers: Vec<usize>,
    step: Option<f64>,
    incumbent: Option<(Vec<f64>, f64)>,
    nodes: u64,
    next_id: u64,
    unresolved: bool,
    /// Lowest bound among subtrees discarded because of the incumbent.
    pruned_bound: f64,
}

enum Branch {
    Var { index: usize, value: f64 },
    Integral,
}

impl Search<'_> {
    fn prunable(&self, bound: f64) -> bool {
        match &self.incumbent {
            Some((_, best)) => {
                bound >= best - self.limits.absolute_gap || best - bound <= self.limits.relative_gap * best.abs()
            }
            None => false,
        }
    }

    fn lp_point(&mut self, lower: &[f64], upper: &[f64]) -> Option<(Vec<f64>, f64)> {
        let reduced = reduce(self.model, lower, upper, true)?;
        let mut outcome = lp::solve(&reduced.lp, LpOptions::default());
        if outcome.is_err() {
            log::debug!("LP numerical trouble, retrying with Bland's rule");
            outcome = lp::solve(&reduced.lp, LpOptions { bland: true });
        }
        match outcome {
            Ok(LpOutcome::Optimal { x, objective }) => Some((reduced.expand(&x), objective + reduced.objective_offset)),
            Ok(LpOutcome::Infeasible) => None,
            Ok(LpOutcome::Unbounded) | Err(_) => {
                log::warn!("node LP unresolved; optimality can no longer be proven");
                self.unresolved = true;
                None
            }
        }
    }

    fn choose_branch(&self, x: &[f64], lower: &[f64], upper: &[f64]) -> Branch {
        let vars = &self.model.vars;
        let mut fractional: Option<(usize, f64)> = None;
        let mut best_frac = -1.0;
        let mut frac_priority = i32::MIN;
        for &k in &self.integers {
            let f = (x[k] - x[k].floor()).min(x[k].ceil() - x[k]);
            if f <= INT_TOL {
                continue;
            }
            let p = vars[k].branch_priority;
            if p < frac_priority {
                break;
            }
            frac_priority = p;
            if f > best_frac + 1e-12 {
                best_frac = f;
                fractional = Some((k, x[k]));
            }
        }
        // An unfixed variable of strictly higher priority is split first.
        for &k in &self.integers {
            if fractional.is_some() && vars[k].branch_priority <= frac_priority {
                break;
            }
            if upper[k] - lower[k] > 0.5 {
                return Branch::Var {
                    index: k,
                    value: x[k].round(),
                };
            }
        }
        match fractional {
            Some((index, value)) => Branch::Var { index, value },
            None => Branch::Integral,
        }
    }

    fn try_incumbent(&mut self, x: &[f64]) {
        let mut point = x.to_vec();
        for &k in &self.integers {
            point[k] = point[k].round();
        }
        for (k, v) in self.model.vars.iter().enumerate() {
            point[k] = point[k].clamp(v.lower, v.upper);
        }
        if self.model.max_violation(&point) > ACCEPT_TOL {
            log::debug!("rounded LP point rejected as incumbent");
            return;
        }
        let obj = self.model.objective_value(&point);
        if self.incumbent.as_ref().is_none_or(|(_, best)| obj < *best) {
            log::debug!("new incumbent {obj} after {} nodes", self.nodes);
            self.incumbent = Some((point, obj));
        }
    }

    fn child(&mut self, parent: &Node, index: usize, lower: f64, upper: f64, bound: f64, hint: Option<Vec<f64>>) -> Node {
        let mut lo = parent.lower.clone();
        let mut hi = parent.upper.clone();
        lo[index] = lower;
        hi[index] = upper;
        self.next_id += 1;
        Node {
            bound,
            depth: parent.depth + 1,
            id: self.next_id,
            lower: lo,
            upper: hi,
            hint,
        }
    }
}

fn within(x: &[f64], lower: &[f64], upper: &[f64]) -> bool {
    x.iter().zip(lower.iter().zip(upper)).all(|(&v, (&l, &u))| v >= l - 1e-9 && v <= u + 1e-9)
}

pub(super) fn branch_and_bound(model: &MilpModel, limits: &SolveLimits) -> MilpSolution {
    let start = Instant::now();
    let mut integers: Vec<usize> = (0..model.vars.len()).filter(|&k| model.vars[k].kind.is_integral()).collect();
    integers.sort_by_key(|&k| (-model.vars[k].branch_priority, k));
    let mut search = Search {
        model,
        limits,
        integers,
        step: objective_step(model),
        incumbent: None,
        nodes: 0,
        next_id: 0,
        unresolved: false,
        pruned_bound: f64::INFINITY,
    };
    let constant = model.objective.normalized().constant;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        id: 0,
        lower: model.vars.iter().map(|v| v.lower).collect(),
        upper: model.vars.iter().map(|v| v.upper).collect(),
        hint: None,
    });
    let mut global_bound = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut limited = false;

    let out_of_budget = |nodes: u64| {
        start.elapsed().as_secs_f64() >= limits.time_limit_seconds || limits.node_limit.is_some_and(|n| nodes >= n)
    };

    'outer: while let Some(node) = heap.pop() {
        if search.prunable(node.bound) {
            search.pruned_bound = search.pruned_bound.min(node.bound);
            continue;
        }
        if node.bound > global_bound {
            global_bound = node.bound;
        }
        if limits.record_bound_trace {
            trace.push(global_bound);
        }
        let mut current = node;
        loop {
            if out_of_budget(search.nodes) {
                heap.push(current);
                limited = true;
                break 'outer;
            }
            search.nodes += 1;
            let (mut lower, mut upper) = (std::mem::take(&mut current.lower), std::mem::take(&mut current.upper));
            if !propagate(model, &mut lower, &mut upper, PROPAGATION_PASSES) {
                break;
            }
            let reused = current.hint.take().filter(|h| within(h, &lower, &upper));
            let (x, raw) = match reused {
                Some(h) => (h, current.bound),
                None => match search.lp_point(&lower, &upper) {
                    Some(p) => p,
                    None => break,
                },
            };
            let bound = round_bound(raw.max(current.bound), search.step, constant);
            if search.prunable(bound) {
                search.pruned_bound = search.pruned_bound.min(bound);
                break;
            }
            current.lower = lower;
            current.upper = upper;
            current.bound = bound;
            match search.choose_branch(&x, &current.lower, &current.upper) {
                Branch::Integral => {
                    search.try_incumbent(&x);
                    break;
                }
                Branch::Var { index, value } => {
                    let (lo, hi) = (current.lower[index], current.upper[index]);
                    let int_value = (value - value.round()).abs() <= INT_TOL;
                    // (lower, upper) for the preferred child, then the other.
                    let (keep, other) = if int_value {
                        let v = value.round();
                        if v >= hi {
                            ((v, hi), (lo, v - 1.0))
                        } else {
                            ((lo, v), (v + 1.0, hi))
                        }
                    } else {
                        let down = (lo, value.floor());
                        let up = (value.ceil(), hi);
                        if value - value.floor() < 0.5 {
                            (down, up)
                        } else {
                            (up, down)
                        }
                    };
                    let sibling = search.child(&current, index, other.0, other.1, bound, None);
                    heap.push(sibling);
                    current = search.child(&current, index, keep.0, keep.1, bound, Some(x));
                }
            }
        }
    }

    let wall_seconds = start.elapsed().as_secs_f64();
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let (status, values, objective, best_bound) = match search.incumbent.take() {
        Some((x, obj)) => {
            let proven = !limited && !search.unresolved;
            let frontier = open_bound.min(search.pruned_bound).min(obj);
            let bound = if proven { frontier.max(global_bound) } else { global_bound }.min(obj);
            let status = if proven { SolveStatus::Optimal } else { SolveStatus::Feasible };
            (status, x, obj, bound)
        }
        None => {
            let status = if limited || search.unresolved {
                SolveStatus::NoSolutionTimeLimit
            } else {
                SolveStatus::Infeasible
            };
            let bound = if status == SolveStatus::Infeasible { f64::INFINITY } else { global_bound };
            (status, Vec::new(), f64::NAN, bound)
        }
    };
    if limits.record_bound_trace && trace.last().is_none_or(|&last| best_bound >= last) {
        trace.push(best_bound);
    }
    MilpSolution {
        status,
        values,
        objective,
        best_bound,
        nodes_explored: search.nodes,
        wall_seconds,
        bound_trace: trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{LinExpr, Sense, VarKind};

    fn knapsack() -> MilpModel {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11
        let mut m = MilpModel::new();
        let a = m.add_var("a", VarKind::Binary, 0.0, 1.0);
        let b = m.add_var("b", VarKind::Binary, 0.0, 1.0);
        let c = m.add_var("c", VarKind::Binary, 0.0, 1.0);
        let mut r1 = LinExpr::term(a, 2.0);
        r1.add_term(b, 3.0).add_term(c, 1.0);
        m.add_constraint("r1", &r1, Sense::Le, 5.0);
        let mut r2 = LinExpr::term(a, 4.0);
        r2.add_term(b, 1.0).add_term(c, 2.0);
        m.add_constraint("r2", &r2, Sense::Le, 11.0);
        let mut obj = LinExpr::term(a, -5.0);
        obj.add_term(b, -4.0).add_term(c, -3.0);
        m.objective = obj;
        m
    }

    #[test]
    fn solves_small_knapsack() {
        let m = knapsack();
        let sol = branch_and_bound(&m, &SolveLimits::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 9.0).abs() < 1e-9, "{}", sol.objective);
        assert!(sol.best_bound <= sol.objective + 1e-9);
        assert!(sol.objective - sol.best_bound <= 1e-6);
    }

    #[test]
    fn detects_infeasibility() {
        let mut m = MilpModel::new();
        let a = m.add_var("a", VarKind::Integer, 0.0, 3.0);
        let mut e = LinExpr::term(a, 2.0);
        e.constant = 0.0;
        m.add_constraint("odd", &e, Sense::Eq, 3.0);
        let sol = branch_and_bound(&m, &SolveLimits::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn node_limit_reports_partial_status() {
        let m = knapsack();
        let limits = SolveLimits {
            node_limit: Some(0),
            ..SolveLimits::default()
        };
        let sol = branch_and_bound(&m, &limits);
        assert_eq!(sol.status, SolveStatus::NoSolutionTimeLimit);
    }

    #[test]
    fn objective_step_detection() {
        let m = knapsack();
        assert_eq!(objective_step(&m), Some(1.0));
        assert_eq!(round_bound(-9.5, Some(1.0), 0.0), -9.0);
        assert_eq!(round_bound(-9.0, Some(1.0), 0.0), -9.0);
    }
}
