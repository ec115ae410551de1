//! Compiles counterfactual queries against an EASE model (and optionally a
//! sum-product network) into a [`MilpModel`], and decodes solutions.
//!
//! Variable names carry their role: `x_<item>` for counterfactual inputs,
//! `xl_<item>_<level>` for rating level selectors, `r_<item>` for rank
//! indicators, `z_<category>` for aggregated features, `ll_<node>` for node
//! log-likelihoods, `s_<node>_<child>` for sum-node selectors and
//! `u_<node>_<bin>` for histogram bin selectors.

use serde::{Deserialize, Serialize};

use crate::dataset::{CategoryMap, ValueDomain};
use crate::ease::{rank_of, EaseModel, ScoreBounds};
use crate::error::{Error, Result};
use crate::milp::{LinExpr, MilpModel, Sense, VarId, VarKind};
use crate::solver::{self, SolveLimits, SolveStatus};
use crate::spn::{aggregate, Aggregator, Bins, Spn, SpnNode};

/// Items that overtake the target must beat it by this much in the model,
/// so re-scored ties and solver tolerances cannot undo a rank drop.
pub const RANK_MARGIN: f64 = 1e-5;
/// Gap kept below the upper edge of a non-final interval bin.
pub const BIN_EDGE_GAP: f64 = 1e-4;
const LEAF_P_MIN: f64 = 1e-6;
const ROUND_TOL: f64 = 1e-6;
const INTEGRAL_TOL: f64 = 1e-4;

const PRIORITY_INPUT: i32 = 2;
const PRIORITY_FEATURE: i32 = 1;
const PRIORITY_AUX: i32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Validity {
    /// At least `rho` other items must score at least as high as the target.
    RankDrop { rho: usize },
    /// The target's score must not exceed `tau`.
    ScoreThreshold { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpnMode {
    NoSpn,
    /// Encoded root log-likelihood must reach `min_ll`.
    Threshold { min_ll: f64 },
    /// Subtract `alpha` times the encoded root log-likelihood from the
    /// objective.
    Optimize { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeQuery {
    pub factual: Vec<f64>,
    pub target_item: usize,
    pub validity: Validity,
    pub spn_mode: SpnMode,
    /// Values the inputs may take.
    pub domain: ValueDomain,
    pub decrease_only: bool,
    /// Keep the target's own interaction unchanged.
    pub fix_target: bool,
    /// The k whose top-k list the target must leave.
    pub k_context: usize,
}

impl CeQuery {
    /// Decrease-only query without an SPN term.
    pub fn new(factual: Vec<f64>, target_item: usize, validity: Validity, domain: ValueDomain, k_context: usize) -> Self {
        CeQuery {
            factual,
            target_item,
            validity,
            spn_mode: SpnMode::NoSpn,
            domain,
            decrease_only: true,
            fix_target: false,
            k_context,
        }
    }

    fn check(&self, items: usize) -> Result<()> {
        if self.factual.len() != items {
            return Err(Error::Dimension {
                expected: items,
                got: self.factual.len(),
            });
        }
        if self.target_item >= items {
            return Err(Error::InvalidArgument(format!(
                "target item {} outside 0..{items}",
                self.target_item
            )));
        }
        if let Validity::RankDrop { rho } = self.validity {
            if rho == 0 || rho >= items {
                return Err(Error::InvalidArgument(format!("rho = {rho} outside 1..={}", items - 1)));
            }
        }
        if let SpnMode::Optimize { alpha } = self.spn_mode {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidArgument(format!("alpha = {alpha} must be a non-negative number")));
            }
        }
        if !self.decrease_only && self.domain == ValueDomain::Raw {
            return Err(Error::InvalidArgument("raw values only support decrease-only queries".into()));
        }
        Ok(())
    }

    /// Levels item `l` may take, ascending.
    fn levels(&self, l: usize) -> Vec<f64> {
        let x = self.factual[l];
        let mut levels = match &self.domain {
            ValueDomain::Raw => vec![0.0, x],
            other => other.levels_with_zero(),
        };
        if self.decrease_only {
            levels.retain(|&v| v <= x + 1e-12);
        }
        if self.fix_target && l == self.target_item {
            levels.retain(|&v| (v - x).abs() <= 1e-12);
        }
        levels.dedup();
        levels
    }
}

/// Where each modelling role lives among the model's variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarRoles {
    /// `x_l` for every item.
    pub inputs: Vec<VarId>,
    /// Level selectors per item with their values; empty for binary inputs.
    pub levels: Vec<Vec<(VarId, f64)>>,
    pub binary_inputs: bool,
    /// Score of every item as an affine form of the inputs.
    pub scores: Vec<LinExpr>,
    pub target_item: Option<usize>,
    pub rank: Vec<(usize, VarId)>,
    pub aggregator: Option<Aggregator>,
    pub aggregates: Vec<VarId>,
    pub node_ll: Vec<VarId>,
    pub root_ll: Option<VarId>,
    pub selections: Vec<VarId>,
    pub bins: Vec<VarId>,
}

/// Counterfactual inputs, ℓ1 objective and score expressions.
pub fn build_core(query: &CeQuery, model: &EaseModel) -> Result<MilpModel> {
    let d = model.item_count();
    query.check(d)?;
    let binary = query.domain.is_binary();
    let mut m = MilpModel::new();
    m.roles.binary_inputs = binary;
    m.roles.target_item = Some(query.target_item);
    let mut objective = LinExpr::default();
    for l in 0..d {
        let x = query.factual[l];
        let levels = query.levels(l);
        if levels.is_empty() {
            return Err(Error::InvalidArgument(format!("item {l} has no admissible value")));
        }
        let (lo, hi) = (levels[0], *levels.last().unwrap());
        if binary {
            let var = m.add_var(format!("x_{l}"), VarKind::Binary, lo, hi);
            m.var_mut(var).branch_priority = PRIORITY_INPUT;
            // |x - x'| is x' when x = 0 and 1 - x' when x = 1.
            if x > 0.5 {
                objective.constant += 1.0;
                objective.add_term(var, -1.0);
            } else {
                objective.add_term(var, 1.0);
            }
            m.roles.inputs.push(var);
            m.roles.levels.push(Vec::new());
            continue;
        }
        let var = m.add_var(format!("x_{l}"), VarKind::Continuous, lo, hi);
        m.roles.inputs.push(var);
        if levels.len() == 1 {
            objective.constant += (x - lo).abs();
            m.roles.levels.push(Vec::new());
            continue;
        }
        let mut pick = LinExpr::default();
        let mut link = LinExpr::term(var, 1.0);
        let mut selectors = Vec::with_capacity(levels.len());
        for (b, &v) in levels.iter().enumerate() {
            let s = m.add_var(format!("xl_{l}_{b}"), VarKind::Binary, 0.0, 1.0);
            m.var_mut(s).branch_priority = PRIORITY_INPUT;
            pick.add_term(s, 1.0);
            link.add_term(s, -v);
            objective.add_term(s, (x - v).abs());
            selectors.push((s, v));
        }
        m.add_constraint(format!("level_{l}"), &pick, Sense::Eq, 1.0);
        m.add_constraint(format!("link_{l}"), &link, Sense::Eq, 0.0);
        m.roles.levels.push(selectors);
    }
    m.objective = objective;

    let inputs = m.roles.inputs.clone();
    let upper: Vec<f64> = inputs.iter().map(|&v| m.var(v).upper).collect();
    m.roles.scores = (0..d)
        .map(|j| {
            let row = model.row(j);
            let mut e = LinExpr::default();
            for l in 0..d {
                if upper[l] != 0.0 && row[l] != 0.0 {
                    e.add_term(inputs[l], row[l]);
                }
            }
            e
        })
        .collect();
    Ok(m)
}

/// Per-input bounds of the model, for [`EaseModel::score_bounds`].
pub fn input_bounds(m: &MilpModel) -> (Vec<f64>, Vec<f64>) {
    m.roles
        .inputs
        .iter()
        .map(|&v| (m.var(v).lower, m.var(v).upper))
        .unzip()
}

/// Requires `rho` items to score at least [`RANK_MARGIN`] above the target.
pub fn add_rank_drop(m: &mut MilpModel, rho: usize, bounds: &ScoreBounds) -> Result<()> {
    let d = m.roles.scores.len();
    let c = m
        .roles
        .target_item
        .ok_or_else(|| Error::InvalidArgument("model has no target item".into()))?;
    if rho == 0 || rho >= d {
        return Err(Error::InvalidArgument(format!("rho = {rho} outside 1..={}", d.saturating_sub(1))));
    }
    let mut count = LinExpr::default();
    for j in (0..d).filter(|&j| j != c) {
        // j can never overtake the target: keep the indicator at 0.
        let hopeless = bounds.max[j] < bounds.min[c] + RANK_MARGIN;
        let r = m.add_var(format!("r_{j}"), VarKind::Binary, 0.0, if hopeless { 0.0 } else { 1.0 });
        m.var_mut(r).branch_priority = PRIORITY_AUX;
        let big_m = (bounds.max[c] - bounds.min[j] + RANK_MARGIN).max(0.0);
        // y_c - y_j + M r_j <= M - margin
        let mut row = m.roles.scores[c].clone();
        row.add_scaled(&m.roles.scores[j].clone(), -1.0);
        row.add_term(r, big_m);
        m.add_constraint(format!("rank_{j}"), &row.normalized(), Sense::Le, big_m - RANK_MARGIN);
        count.add_term(r, 1.0);
        m.roles.rank.push((j, r));
    }
    m.add_constraint("rank_count", &count, Sense::Ge, rho as f64);
    Ok(())
}

/// `y_c <= tau`.
pub fn add_score_threshold(m: &mut MilpModel, tau: f64) -> Result<()> {
    let c = m
        .roles
        .target_item
        .ok_or_else(|| Error::InvalidArgument("model has no target item".into()))?;
    if tau.is_finite() {
        let expr = m.roles.scores[c].normalized();
        m.add_constraint("score_threshold", &expr, Sense::Le, tau);
    }
    Ok(())
}

/// Adds one feature variable `z_j` per category.
pub fn add_aggregation(m: &mut MilpModel, cmap: &CategoryMap, agg: Aggregator) -> Result<()> {
    if agg.requires_binary_input() && !m.roles.binary_inputs {
        return Err(Error::InvalidArgument(format!("{agg:?} aggregation needs binary inputs")));
    }
    let d = m.roles.inputs.len();
    if let Some(&l) = cmap.members.iter().flatten().find(|&&l| l >= d) {
        return Err(Error::InvalidArgument(format!("category member {l} outside 0..{d}")));
    }
    m.roles.aggregator = Some(agg);
    for (j, members) in cmap.members.iter().enumerate() {
        let size = members.len().max(1) as f64;
        let mut sum = LinExpr::default();
        let (mut lo, mut hi) = (0.0, 0.0);
        for &l in members {
            let v = m.roles.inputs[l];
            sum.add_term(v, 1.0);
            lo += m.var(v).lower;
            hi += m.var(v).upper;
        }
        let z = match agg {
            Aggregator::Sum | Aggregator::Mean => {
                let scale = if agg == Aggregator::Mean { size } else { 1.0 };
                let z = m.add_var(format!("z_{j}"), VarKind::Continuous, lo / scale, hi / scale);
                let mut row = LinExpr::term(z, 1.0);
                row.add_scaled(&sum, -1.0 / scale);
                m.add_constraint(format!("agg_{j}"), &row, Sense::Eq, 0.0);
                z
            }
            Aggregator::Disjunction => {
                let z = m.add_var(
                    format!("z_{j}"),
                    VarKind::Binary,
                    if lo > 0.0 { 1.0 } else { 0.0 },
                    if hi > 0.0 { 1.0 } else { 0.0 },
                );
                // z <= Σ x'  and  |K| z >= Σ x'
                let mut upper = LinExpr::term(z, 1.0);
                upper.add_scaled(&sum, -1.0);
                m.add_constraint(format!("agg_{j}_hi"), &upper, Sense::Le, 0.0);
                if !members.is_empty() {
                    let mut lower = LinExpr::term(z, size);
                    lower.add_scaled(&sum, -1.0);
                    m.add_constraint(format!("agg_{j}_lo"), &lower, Sense::Ge, 0.0);
                }
                z
            }
        };
        m.var_mut(z).branch_priority = PRIORITY_FEATURE;
        m.roles.aggregates.push(z);
    }
    Ok(())
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(LEAF_P_MIN, 1.0 - LEAF_P_MIN)
}

/// Log-likelihood bounds per node under the encoding (clamped leaves,
/// max-mixture sums).
fn encoding_bounds(spn: &Spn) -> Vec<(f64, f64)> {
    let mut bounds: Vec<(f64, f64)> = Vec::with_capacity(spn.nodes().len());
    for (n, node) in spn.nodes().iter().enumerate() {
        let b = match node {
            SpnNode::Bernoulli { p, .. } => {
                let (a, b) = (clamp_p(*p).ln(), (1.0 - clamp_p(*p)).ln());
                (a.min(b), a.max(b))
            }
            SpnNode::Histogram { .. } => spn.node_ll_bounds()[n],
            SpnNode::Product { children } => children
                .iter()
                .fold((0.0, 0.0), |(lo, hi), &c| (lo + bounds[c].0, hi + bounds[c].1)),
            SpnNode::Sum { children, log_weights } => children.iter().zip(log_weights).fold(
                (f64::NEG_INFINITY, f64::NEG_INFINITY),
                |(lo, hi), (&c, w)| (lo.max(w + bounds[c].0), hi.max(w + bounds[c].1)),
            ),
        };
        bounds.push(b);
    }
    bounds
}

/// Encodes the network's log-likelihood over the aggregated features.
pub fn add_spn(m: &mut MilpModel, spn: &Spn, mode: SpnMode) -> Result<()> {
    if mode == SpnMode::NoSpn {
        return Ok(());
    }
    match m.roles.aggregator {
        Some(agg) if agg == spn.aggregator() => {}
        Some(agg) => {
            return Err(Error::InvalidArgument(format!(
                "network uses {:?} aggregation but the model uses {agg:?}",
                spn.aggregator()
            )))
        }
        None => return Err(Error::InvalidArgument("add the aggregation before the network".into())),
    }
    if spn.scope_size() != m.roles.aggregates.len() {
        return Err(Error::Dimension {
            expected: m.roles.aggregates.len(),
            got: spn.scope_size(),
        });
    }
    let bounds = encoding_bounds(spn);
    let mut ll = Vec::with_capacity(spn.nodes().len());
    for (n, node) in spn.nodes().iter().enumerate() {
        let (lo, hi) = bounds[n];
        let var = m.add_var(format!("ll_{n}"), VarKind::Continuous, lo, hi);
        ll.push(var);
        match node {
            SpnNode::Bernoulli { feature, p } => {
                let z = m.roles.aggregates[*feature];
                let (lp, lq) = (clamp_p(*p).ln(), (1.0 - clamp_p(*p)).ln());
                // ll = z log p + (1 - z) log(1 - p)
                let mut row = LinExpr::term(var, 1.0);
                row.add_term(z, -(lp - lq));
                m.add_constraint(format!("leaf_{n}"), &row, Sense::Eq, lq);
            }
            SpnNode::Histogram { feature, bins, log_mass } => {
                encode_histogram(m, n, var, m.roles.aggregates[*feature], bins, log_mass);
            }
            SpnNode::Product { children } => {
                let mut row = LinExpr::term(var, 1.0);
                for &c in children {
                    row.add_term(ll[c], -1.0);
                }
                m.add_constraint(format!("prod_{n}"), &row, Sense::Eq, 0.0);
            }
            SpnNode::Sum { children, log_weights } => {
                let mut pick = LinExpr::default();
                for (i, (&c, &w)) in children.iter().zip(log_weights).enumerate() {
                    let s = m.add_var(format!("s_{n}_{i}"), VarKind::Binary, 0.0, 1.0);
                    m.var_mut(s).branch_priority = PRIORITY_AUX;
                    m.roles.selections.push(s);
                    pick.add_term(s, 1.0);
                    // ll <= w + ll_c + M (1 - s)
                    let big_m = (hi - w - bounds[c].0).max(0.0);
                    let mut row = LinExpr::term(var, 1.0);
                    row.add_term(ll[c], -1.0);
                    row.add_term(s, big_m);
                    m.add_constraint(format!("sum_{n}_{i}"), &row, Sense::Le, w + big_m);
                }
                m.add_constraint(format!("sel_{n}"), &pick, Sense::Eq, 1.0);
            }
        }
    }
    let root = *ll.last().expect("validated networks have a root");
    m.roles.node_ll = ll;
    m.roles.root_ll = Some(root);
    match mode {
        SpnMode::Threshold { min_ll } => {
            m.add_constraint("spn_threshold", &LinExpr::term(root, 1.0), Sense::Ge, min_ll);
        }
        SpnMode::Optimize { alpha } => {
            m.objective.add_term(root, -alpha);
        }
        SpnMode::NoSpn => unreachable!(),
    }
    Ok(())
}

fn encode_histogram(m: &mut MilpModel, n: usize, ll: VarId, z: VarId, bins: &Bins, log_mass: &[f64]) {
    let (zlo, zhi) = (m.var(z).lower, m.var(z).upper);
    let count = bins.len();
    let mut pick = LinExpr::default();
    let mut value = LinExpr::term(ll, 1.0);
    let mut low = LinExpr::term(z, 1.0);
    let mut high = LinExpr::term(z, 1.0);
    let mut point = LinExpr::term(z, 1.0);
    for b in 0..count {
        // Range of z values that land in bin b, including clamped ones.
        let (from, to) = match bins {
            Bins::Points { values } => (values[b], values[b]),
            Bins::Intervals { edges } => (
                if b == 0 { edges[0].min(zlo) } else { edges[b] },
                if b + 1 == count {
                    edges[b + 1].max(zhi)
                } else {
                    edges[b + 1] - BIN_EDGE_GAP
                },
            ),
        };
        let reachable = match bins {
            Bins::Points { .. } => {
                from >= zlo - 1e-9 && from <= zhi + 1e-9 || (b == 0 && zhi < from) || (b + 1 == count && zlo > from)
            }
            Bins::Intervals { .. } => to >= zlo - 1e-9 && from <= zhi + 1e-9,
        };
        let u = m.add_var(format!("u_{n}_{b}"), VarKind::Binary, 0.0, if reachable { 1.0 } else { 0.0 });
        m.var_mut(u).branch_priority = PRIORITY_FEATURE;
        m.roles.bins.push(u);
        pick.add_term(u, 1.0);
        value.add_term(u, -(log_mass[b] - bins.log_width(b)));
        point.add_term(u, -from);
        low.add_term(u, -from);
        high.add_term(u, -to);
    }
    m.add_constraint(format!("bin_{n}"), &pick, Sense::Eq, 1.0);
    match bins {
        Bins::Points { .. } => {
            m.add_constraint(format!("bin_{n}_value"), &point, Sense::Eq, 0.0);
        }
        Bins::Intervals { .. } => {
            m.add_constraint(format!("bin_{n}_lo"), &low, Sense::Ge, 0.0);
            m.add_constraint(format!("bin_{n}_hi"), &high, Sense::Le, 0.0);
        }
    }
    m.add_constraint(format!("leaf_{n}"), &value, Sense::Eq, 0.0);
}

/// Network and category map used for likelihood terms.
#[derive(Debug, Clone, Copy)]
pub struct SpnContext<'a> {
    pub spn: &'a Spn,
    pub categories: &'a CategoryMap,
}

/// Builds the full model for a query.
pub fn compile(query: &CeQuery, model: &EaseModel, spn: Option<SpnContext<'_>>) -> Result<MilpModel> {
    let mut m = build_core(query, model)?;
    match query.validity {
        Validity::RankDrop { rho } => {
            let (lower, upper) = input_bounds(&m);
            let bounds = model.score_bounds(&lower, &upper)?;
            add_rank_drop(&mut m, rho, &bounds)?;
        }
        Validity::ScoreThreshold { tau } => add_score_threshold(&mut m, tau)?,
    }
    if query.spn_mode != SpnMode::NoSpn {
        let ctx = spn.ok_or_else(|| Error::InvalidArgument("likelihood mode needs a network".into()))?;
        add_aggregation(&mut m, ctx.categories, ctx.spn.aggregator())?;
        add_spn(&mut m, ctx.spn, query.spn_mode)?;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeStatus {
    Optimal,
    FeasibleTimeLimit,
    Infeasible,
    TimeLimitNoSolution,
}

impl From<SolveStatus> for CeStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => CeStatus::Optimal,
            SolveStatus::Feasible => CeStatus::FeasibleTimeLimit,
            SolveStatus::Infeasible => CeStatus::Infeasible,
            SolveStatus::NoSolutionTimeLimit => CeStatus::TimeLimitNoSolution,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangedItem {
    pub item: usize,
    pub old: f64,
    pub new: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeResult {
    pub status: CeStatus,
    pub counterfactual: Option<Vec<f64>>,
    pub l1_distance: Option<f64>,
    /// Network log-likelihood of the counterfactual's features.
    pub exact_ll: Option<f64>,
    /// Root log-likelihood as encoded in the model, never above the
    /// max-mixture value of the counterfactual.
    pub encoded_ll: Option<f64>,
    pub changed_items: Vec<ChangedItem>,
    pub target_rank_before: usize,
    pub target_rank_after: Option<usize>,
    /// The target left the top `k_context` after re-scoring.
    pub valid_rank_drop: Option<bool>,
    pub objective: Option<f64>,
    pub objective_bound: Option<f64>,
    pub solve_seconds: f64,
    pub nodes_explored: u64,
}

fn snap(m: &MilpModel, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != m.vars.len() {
        return Err(Error::Dimension {
            expected: m.vars.len(),
            got: values.len(),
        });
    }
    let mut out = values.to_vec();
    for (v, var) in out.iter_mut().zip(&m.vars) {
        if var.kind.is_integral() {
            let r = v.round();
            if (*v - r).abs() > INTEGRAL_TOL {
                return Err(Error::NotIntegral {
                    name: var.name.clone(),
                    value: *v,
                });
            }
            if (*v - r).abs() > ROUND_TOL {
                log::debug!("rounding {} = {} to {r}", var.name, v);
            }
            *v = r;
        }
    }
    Ok(out)
}

/// Rebuilds the counterfactual from raw variable values and re-evaluates it
/// from scratch.
pub fn decode(
    m: &MilpModel,
    values: &[f64],
    query: &CeQuery,
    model: &EaseModel,
    spn: Option<SpnContext<'_>>,
) -> Result<CeResult> {
    query.check(model.item_count())?;
    let values = snap(m, values)?;
    let x = &query.factual;
    let cf: Vec<f64> = (0..x.len())
        .map(|l| {
            let selectors = &m.roles.levels[l];
            if selectors.is_empty() {
                let var = m.var(m.roles.inputs[l]);
                let v = values[m.roles.inputs[l].0];
                if var.kind.is_integral() || var.lower == var.upper {
                    v.clamp(var.lower, var.upper)
                } else {
                    v
                }
            } else {
                selectors
                    .iter()
                    .find(|(s, _)| values[s.0] == 1.0)
                    .map_or(values[m.roles.inputs[l].0], |&(_, level)| level)
            }
        })
        // Turn any -0.0 left by rounding into 0.0.
        .map(|v: f64| v + 0.0)
        .collect();
    let l1 = x.iter().zip(&cf).map(|(a, b)| (a - b).abs()).sum();
    let changed_items = x
        .iter()
        .zip(&cf)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(item, (&old, &new))| ChangedItem { item, old, new })
        .collect();
    let before = rank_of(&model.score(x)?, query.target_item);
    let after = rank_of(&model.score(&cf)?, query.target_item);
    let (mut exact_ll, mut encoded_ll) = (None, None);
    if let Some(ctx) = spn {
        let z = aggregate(&cf, ctx.categories, ctx.spn.aggregator())?;
        let exact = ctx.spn.log_likelihood(&z.values)?;
        exact_ll = Some(exact);
        if let Some(root) = m.roles.root_ll {
            let tight = ctx.spn.max_log_likelihood(&z.values)?;
            encoded_ll = Some(values[root.0].min(tight));
        }
    }
    Ok(CeResult {
        status: CeStatus::Optimal,
        counterfactual: Some(cf),
        l1_distance: Some(l1),
        exact_ll,
        encoded_ll,
        changed_items,
        target_rank_before: before,
        target_rank_after: Some(after),
        valid_rank_drop: Some(after > query.k_context),
        objective: Some(m.objective_value(&values)),
        objective_bound: None,
        solve_seconds: 0.0,
        nodes_explored: 0,
    })
}

/// Compiles, solves and decodes one query.
pub fn explain(query: &CeQuery, model: &EaseModel, spn: Option<SpnContext<'_>>, limits: &SolveLimits) -> Result<CeResult> {
    let m = compile(query, model, spn)?;
    let solution = solver::solve(&m, limits)?;
    let mut result = if solution.status.has_solution() {
        decode(&m, &solution.values, query, model, spn)?
    } else {
        CeResult {
            status: CeStatus::Infeasible,
            counterfactual: None,
            l1_distance: None,
            exact_ll: None,
            encoded_ll: None,
            changed_items: Vec::new(),
            target_rank_before: rank_of(&model.score(&query.factual)?, query.target_item),
            target_rank_after: None,
            valid_rank_drop: None,
            objective: None,
            objective_bound: None,
            solve_seconds: 0.0,
            nodes_explored: 0,
        }
    };
    result.status = solution.status.into();
    result.objective_bound = solution.best_bound.is_finite().then_some(solution.best_bound);
    result.solve_seconds = solution.wall_seconds;
    result.nodes_explored = solution.nodes_explored;
    Ok(result)
}
