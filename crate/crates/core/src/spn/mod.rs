//! Sum-product networks over aggregated category features: exact
//! log-likelihood, the max-mixture lower bound used by the MILP encoding,
//! per-node bounds, learning and JSON persistence.

mod aggregate;
mod learn;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aggregate::{aggregate, feature_domains, AggregatedVector, Aggregator, FeatureDomain};
pub use learn::{learn_spn, SpnParams};

const FORMAT_VERSION: u32 = 1;
const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Support of a histogram leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Bins {
    /// One bin per listed integer value.
    Points { values: Vec<f64> },
    /// Half-open bins `[edges[b], edges[b+1])`, the last one closed.
    Intervals { edges: Vec<f64> },
}

impl Bins {
    pub fn len(&self) -> usize {
        match self {
            Bins::Points { values } => values.len(),
            Bins::Intervals { edges } => edges.len() - 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bin holding `z`; out-of-range values clamp to the nearest bin.
    pub fn locate(&self, z: f64) -> usize {
        let last = self.len() - 1;
        let (idx, clamped) = match self {
            Bins::Points { values } => {
                let mut best = 0;
                for (b, v) in values.iter().enumerate() {
                    if (v - z).abs() < (values[best] - z).abs() {
                        best = b;
                    }
                }
                (best, (values[best] - z).abs() > 1e-6)
            }
            Bins::Intervals { edges } => {
                if z < edges[0] - 1e-9 {
                    (0, true)
                } else if z > edges[last + 1] + 1e-9 {
                    (last, true)
                } else {
                    let pos = edges[1..=last].iter().take_while(|&&e| z + 1e-9 >= e).count();
                    (pos, false)
                }
            }
        };
        if clamped {
            log::debug!("histogram input {z} outside support, clamped to bin {idx}");
        }
        idx
    }

    /// Log of the bin width for interval bins (density conversion), 0 for
    /// point masses.
    pub fn log_width(&self, b: usize) -> f64 {
        match self {
            Bins::Points { .. } => 0.0,
            Bins::Intervals { edges } => (edges[b + 1] - edges[b]).ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpnNode {
    Sum { children: Vec<usize>, log_weights: Vec<f64> },
    Product { children: Vec<usize> },
    Bernoulli { feature: usize, p: f64 },
    Histogram { feature: usize, bins: Bins, log_mass: Vec<f64> },
}

impl SpnNode {
    pub fn children(&self) -> &[usize] {
        match self {
            SpnNode::Sum { children, .. } | SpnNode::Product { children } => children,
            _ => &[],
        }
    }

    /// Log-likelihood of a leaf at `z` (log mass, or log density for
    /// interval bins).
    fn leaf_ll(&self, z: f64) -> f64 {
        match self {
            SpnNode::Bernoulli { p, .. } => {
                if z >= 0.5 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            }
            SpnNode::Histogram { bins, log_mass, .. } => {
                let b = bins.locate(z);
                log_mass[b] - bins.log_width(b)
            }
            _ => unreachable!("leaf_ll on inner node"),
        }
    }

    fn leaf_feature(&self) -> Option<usize> {
        match self {
            SpnNode::Bernoulli { feature, .. } | SpnNode::Histogram { feature, .. } => Some(*feature),
            _ => None,
        }
    }
}

/// A validated network. Nodes are stored children-first; the root is the
/// last node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spn {
    format_version: u32,
    nodes: Vec<SpnNode>,
    aggregator: Aggregator,
    domains: Vec<FeatureDomain>,
    median_train_ll: f64,
    node_ll_bounds: Vec<(f64, f64)>,
}

impl Spn {
    /// Validates structure and parameters. `median_train_ll` starts at
    /// negative infinity until [`Spn::calibrate_median`] is called.
    pub fn from_nodes(nodes: Vec<SpnNode>, aggregator: Aggregator, domains: Vec<FeatureDomain>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("network has no nodes".into()));
        }
        let k = domains.len();
        let mut scopes: Vec<Vec<usize>> = Vec::with_capacity(nodes.len());
        let mut parents = vec![0usize; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            let scope = match node {
                SpnNode::Bernoulli { feature, p } => {
                    if !(*p > 0.0 && *p < 1.0) {
                        return Err(Error::InvalidArgument(format!("node {id}: probability {p} not in (0,1)")));
                    }
                    vec![*feature]
                }
                SpnNode::Histogram { feature, bins, log_mass } => {
                    if bins.is_empty() || bins.len() != log_mass.len() {
                        return Err(Error::InvalidArgument(format!("node {id}: bins and masses disagree")));
                    }
                    let total: f64 = log_mass.iter().map(|m| m.exp()).sum();
                    if (total - 1.0).abs() > WEIGHT_TOLERANCE || log_mass.iter().any(|m| !m.is_finite()) {
                        return Err(Error::InvalidArgument(format!("node {id}: masses sum to {total}")));
                    }
                    vec![*feature]
                }
                SpnNode::Sum { children, log_weights } => {
                    if children.is_empty() || children.len() != log_weights.len() {
                        return Err(Error::InvalidArgument(format!("node {id}: malformed sum node")));
                    }
                    let total: f64 = log_weights.iter().map(|w| w.exp()).sum();
                    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                        return Err(Error::InvalidArgument(format!("node {id}: weights sum to {total}")));
                    }
                    Self::check_children(id, children)?;
                    let first = &scopes[children[0]];
                    if children.iter().any(|&c| &scopes[c] != first) {
                        return Err(Error::InvalidArgument(format!("node {id}: sum children differ in scope")));
                    }
                    first.clone()
                }
                SpnNode::Product { children } => {
                    if children.is_empty() {
                        return Err(Error::InvalidArgument(format!("node {id}: empty product")));
                    }
                    Self::check_children(id, children)?;
                    let mut merged: Vec<usize> = children.iter().flat_map(|&c| scopes[c].iter().copied()).collect();
                    let before = merged.len();
                    merged.sort_unstable();
                    merged.dedup();
                    if merged.len() != before {
                        return Err(Error::InvalidArgument(format!("node {id}: product children overlap")));
                    }
                    merged
                }
            };
            if let Some(f) = node.leaf_feature() {
                if f >= k {
                    return Err(Error::InvalidArgument(format!("node {id}: feature {f} out of range")));
                }
            }
            for &c in node.children() {
                parents[c] += 1;
            }
            scopes.push(scope);
        }
        let root = nodes.len() - 1;
        if scopes[root] != (0..k).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument("root scope does not cover every feature".into()));
        }
        if let Some(orphan) = (0..root).find(|&i| parents[i] == 0) {
            return Err(Error::InvalidArgument(format!("node {orphan} is unreachable from the root")));
        }
        let mut spn = Spn {
            format_version: FORMAT_VERSION,
            nodes,
            aggregator,
            domains,
            median_train_ll: f64::NEG_INFINITY,
            node_ll_bounds: Vec::new(),
        };
        spn.node_ll_bounds = spn.compute_ll_bounds();
        Ok(spn)
    }

    fn check_children(id: usize, children: &[usize]) -> Result<()> {
        if children.iter().any(|&c| c >= id) {
            return Err(Error::InvalidArgument(format!("node {id}: children must precede their parent")));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[SpnNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn scope_size(&self) -> usize {
        self.domains.len()
    }

    pub fn aggregator(&self) -> Aggregator {
        self.aggregator
    }

    pub fn domains(&self) -> &[FeatureDomain] {
        &self.domains
    }

    pub fn median_train_ll(&self) -> f64 {
        self.median_train_ll
    }

    /// Per-node `[min, max]` of the max-mixture value over the input domain.
    pub fn node_ll_bounds(&self) -> &[(f64, f64)] {
        &self.node_ll_bounds
    }

    /// Sets the cached median to the median log-likelihood of `rows`.
    pub fn calibrate_median(&mut self, rows: &[Vec<f64>]) -> Result<f64> {
        let m = median_ll(self, rows)?;
        self.median_train_ll = m;
        Ok(m)
    }

    /// Exact log-likelihood of every node at `z`.
    pub fn node_log_likelihoods(&self, z: &[f64]) -> Vec<f64> {
        self.evaluate(z, false)
    }

    /// Per-node values when every sum node takes the best weighted child
    /// instead of the full mixture. Never exceeds the exact value.
    pub fn node_max_log_likelihoods(&self, z: &[f64]) -> Vec<f64> {
        self.evaluate(z, true)
    }

    fn evaluate(&self, z: &[f64], max_mixture: bool) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                SpnNode::Bernoulli { feature, .. } | SpnNode::Histogram { feature, .. } => node.leaf_ll(z[*feature]),
                SpnNode::Product { children } => children.iter().map(|&c| values[c]).sum(),
                SpnNode::Sum { children, log_weights } => {
                    let terms = children.iter().zip(log_weights).map(|(&c, w)| w + values[c]);
                    if max_mixture {
                        terms.fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        log_sum_exp(terms)
                    }
                }
            };
            values.push(v);
        }
        values
    }

    pub fn log_likelihood(&self, z: &[f64]) -> Result<f64> {
        self.check_len(z)?;
        Ok(self.node_log_likelihoods(z)[self.root()])
    }

    /// Root value of the max-mixture evaluation.
    pub fn max_log_likelihood(&self, z: &[f64]) -> Result<f64> {
        self.check_len(z)?;
        Ok(self.node_max_log_likelihoods(z)[self.root()])
    }

    fn check_len(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.scope_size() {
            return Err(Error::Dimension {
                expected: self.scope_size(),
                got: z.len(),
            });
        }
        Ok(())
    }

    fn compute_ll_bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds: Vec<(f64, f64)> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let b = match node {
                SpnNode::Bernoulli { p, .. } => {
                    let (a, b) = (p.ln(), (1.0 - p).ln());
                    (a.min(b), a.max(b))
                }
                SpnNode::Histogram { bins, log_mass, .. } => log_mass
                    .iter()
                    .enumerate()
                    .map(|(b, m)| m - bins.log_width(b))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v))),
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

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Spn = serde_json::from_str(text)?;
        if raw.format_version != FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported network format version {}", raw.format_version)));
        }
        let mut spn = Spn::from_nodes(raw.nodes, raw.aggregator, raw.domains)?;
        spn.median_train_ll = raw.median_train_ll;
        Ok(spn)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Spn::from_json(&text)
    }
}

/// `ll_bounds` operation: the cached per-node interval.
pub fn ll_bounds(spn: &Spn) -> &[(f64, f64)] {
    spn.node_ll_bounds()
}

/// Median (lower middle for even counts) root log-likelihood over `rows`.
pub fn median_ll(spn: &Spn, rows: &[Vec<f64>]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("median over no rows".into()));
    }
    let mut lls = rows.iter().map(|r| spn.log_likelihood(r)).collect::<Result<Vec<f64>>>()?;
    Ok(lower_median(&mut lls))
}

pub(crate) fn lower_median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}
