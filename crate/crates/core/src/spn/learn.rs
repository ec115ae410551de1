//! Recursive structure learning: split features into independent groups
//! when a G-test allows it, otherwise split rows with 2-means, and stop at
//! univariate leaves or small row counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{Aggregator, Bins, FeatureDomain, Spn, SpnNode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpnParams {
    pub min_instances_split: usize,
    /// p-value below which two features count as dependent.
    pub independence_threshold: f64,
    /// Laplace pseudo-count added to every leaf bin.
    pub smoothing: f64,
    pub seed: u64,
    /// Equal-width bins for `[0, 1]`-valued features.
    pub bins: usize,
}

impl Default for SpnParams {
    fn default() -> Self {
        SpnParams {
            min_instances_split: 100,
            independence_threshold: 0.001,
            smoothing: 1.0,
            seed: 0,
            bins: 10,
        }
    }
}

const KMEANS_ITERATIONS: usize = 50;

struct Learner<'a> {
    data: &'a [Vec<f64>],
    domains: &'a [FeatureDomain],
    params: &'a SpnParams,
    rng: ChaCha8Rng,
    nodes: Vec<SpnNode>,
}

/// Learns a network on aggregated rows, then caches the training median.
pub fn learn_spn(data: &[Vec<f64>], domains: &[FeatureDomain], aggregator: Aggregator, params: &SpnParams) -> Result<Spn> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot learn a network from no rows".into()));
    }
    if domains.is_empty() {
        return Err(Error::InvalidArgument("cannot learn a network over no features".into()));
    }
    if let Some(r) = data.iter().position(|r| r.len() != domains.len()) {
        return Err(Error::Dimension {
            expected: domains.len(),
            got: data[r].len(),
        });
    }
    if params.smoothing <= 0.0 || params.bins == 0 {
        return Err(Error::InvalidArgument("smoothing and bin count must be positive".into()));
    }
    let mut learner = Learner {
        data,
        domains,
        params,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..data.len()).collect();
    let scope: Vec<usize> = (0..domains.len()).collect();
    learner.learn(&rows, &scope);
    let mut spn = Spn::from_nodes(learner.nodes, aggregator, domains.to_vec())?;
    spn.calibrate_median(data)?;
    Ok(spn)
}

impl Learner<'_> {
    fn push(&mut self, node: SpnNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn learn(&mut self, rows: &[usize], scope: &[usize]) -> usize {
        if scope.len() == 1 {
            return self.leaf(rows, scope[0]);
        }
        if rows.len() < self.params.min_instances_split {
            return self.factorize(rows, scope);
        }
        let groups = self.independent_groups(rows, scope);
        if groups.len() > 1 {
            let children = groups.iter().map(|g| self.learn(rows, g)).collect();
            return self.push(SpnNode::Product { children });
        }
        match self.two_means(rows, scope) {
            Some((a, b)) => {
                let n = rows.len() as f64;
                let log_weights = vec![(a.len() as f64 / n).ln(), (b.len() as f64 / n).ln()];
                let left = self.learn(&a, scope);
                let right = self.learn(&b, scope);
                self.push(SpnNode::Sum {
                    children: vec![left, right],
                    log_weights,
                })
            }
            None => self.factorize(rows, scope),
        }
    }

    fn factorize(&mut self, rows: &[usize], scope: &[usize]) -> usize {
        let children = scope.iter().map(|&f| self.leaf(rows, f)).collect();
        self.push(SpnNode::Product { children })
    }

    fn leaf(&mut self, rows: &[usize], feature: usize) -> usize {
        let s = self.params.smoothing;
        let n = rows.len() as f64;
        let node = match self.domains[feature] {
            FeatureDomain::Binary => {
                let ones = rows.iter().filter(|&&r| self.data[r][feature] >= 0.5).count() as f64;
                SpnNode::Bernoulli {
                    feature,
                    p: (ones + s) / (n + 2.0 * s),
                }
            }
            domain => {
                let bins = leaf_bins(domain, self.params.bins);
                let mut counts = vec![0.0; bins.len()];
                for &r in rows {
                    counts[bins.locate(self.data[r][feature])] += 1.0;
                }
                let total = n + s * counts.len() as f64;
                SpnNode::Histogram {
                    feature,
                    log_mass: counts.iter().map(|c| ((c + s) / total).ln()).collect(),
                    bins,
                }
            }
        };
        self.push(node)
    }

    /// Connected components of the "dependent" graph over `scope`.
    fn independent_groups(&self, rows: &[usize], scope: &[usize]) -> Vec<Vec<usize>> {
        let m = scope.len();
        let codes: Vec<Vec<usize>> = scope
            .iter()
            .map(|&f| {
                let bins = leaf_bins(self.domains[f], self.params.bins);
                rows.iter().map(|&r| bins.locate(self.data[r][f])).collect()
            })
            .collect();
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for a in 0..m {
            for b in (a + 1)..m {
                if find(&mut parent, a) == find(&mut parent, b) {
                    continue;
                }
                if g_test_p_value(&codes[a], &codes[b]) < self.params.independence_threshold {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[rb] = ra;
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_slot: Vec<Option<usize>> = vec![None; m];
        for (i, &feature) in scope.iter().enumerate() {
            let r = find(&mut parent, i);
            let slot = *root_slot[r].get_or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[slot].push(feature);
        }
        groups
    }

    /// Seeded 2-means on the rows restricted to `scope`. `None` when the rows
    /// are all identical.
    fn two_means(&mut self, rows: &[usize], scope: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
        let point = |r: usize| -> Vec<f64> { scope.iter().map(|&f| self.data[r][f]).collect() };
        let dist = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
        let first = point(rows[self.rng.random_range(0..rows.len())]);
        let mut far = 0;
        let mut far_d = 0.0;
        for (pos, &r) in rows.iter().enumerate() {
            let d = dist(&point(r), &first);
            if d > far_d {
                far_d = d;
                far = pos;
            }
        }
        if far_d == 0.0 {
            return None;
        }
        let mut centers = [first, point(rows[far])];
        let mut assign = vec![0u8; rows.len()];
        for _ in 0..KMEANS_ITERATIONS {
            let mut changed = false;
            for (pos, &r) in rows.iter().enumerate() {
                let p = point(r);
                let c = u8::from(dist(&p, &centers[1]) < dist(&p, &centers[0]));
                if c != assign[pos] {
                    assign[pos] = c;
                    changed = true;
                }
            }
            let mut sums = [vec![0.0; scope.len()], vec![0.0; scope.len()]];
            let mut counts = [0usize; 2];
            for (pos, &r) in rows.iter().enumerate() {
                let c = usize::from(assign[pos]);
                counts[c] += 1;
                for (s, &f) in sums[c].iter_mut().zip(scope) {
                    *s += self.data[r][f];
                }
            }
            for c in 0..2 {
                if counts[c] > 0 {
                    centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                }
            }
            if !changed {
                break;
            }
        }
        let a: Vec<usize> = rows.iter().zip(&assign).filter(|e| *e.1 == 0).map(|e| *e.0).collect();
        let b: Vec<usize> = rows.iter().zip(&assign).filter(|e| *e.1 != 0).map(|e| *e.0).collect();
        if a.is_empty() || b.is_empty() {
            return None;
        }
        Some((a, b))
    }
}

pub(crate) fn leaf_bins(domain: FeatureDomain, bins: usize) -> Bins {
    match domain {
        FeatureDomain::Binary => Bins::Points { values: vec![0.0, 1.0] },
        FeatureDomain::Count { max } => Bins::Points {
            values: (0..=max).map(|v| v as f64).collect(),
        },
        FeatureDomain::Unit => Bins::Intervals {
            edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        },
    }
}

/// p-value of the G-test of independence between two coded columns.
fn g_test_p_value(a: &[usize], b: &[usize]) -> f64 {
    let ra = a.iter().max().map_or(0, |m| m + 1);
    let rb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0.0f64; rb]; ra];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<f64> = (0..rb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let n = a.len() as f64;
    let rows_used = row_tot.iter().filter(|&&t| t > 0.0).count();
    let cols_used = col_tot.iter().filter(|&&t| t > 0.0).count();
    if rows_used < 2 || cols_used < 2 {
        return 1.0;
    }
    let mut g = 0.0;
    for i in 0..ra {
        for j in 0..rb {
            let o = table[i][j];
            if o > 0.0 {
                let e = row_tot[i] * col_tot[j] / n;
                g += o * (o / e).ln();
            }
        }
    }
    g *= 2.0;
    let df = ((rows_used - 1) * (cols_used - 1)) as f64;
    match ChiSquared::new(df) {
        Ok(chi) => chi.sf(g.max(0.0)),
        Err(_) => 1.0,
    }
}
