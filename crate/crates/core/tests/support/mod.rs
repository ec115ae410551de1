//! Reference implementations used as test oracles. They deliberately avoid
//! the library's own solvers and linear algebra.
#![allow(dead_code)]

use cfrec::dataset::{InteractionMatrix, ValueDomain};
use cfrec::ease::{train_ease, EaseModel};
use cfrec::milp::{MilpModel, Sense};
use cfrec::mio::{CeQuery, Validity};
use cfrec::solver::LpProblem;
use cfrec::spn::{Bins, FeatureDomain, Spn, SpnNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleLp {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

/// Textbook two-phase simplex on the standard form `A y = b, y >= 0`, with
/// shifted variables `y = x - lower`, upper bounds as explicit rows, and
/// Bland's rule throughout.
pub fn tableau_simplex(p: &LpProblem) -> OracleLp {
    let n = p.costs.len();
    // Dense rows (coefficients over y, sense, rhs).
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for r in &p.rows {
        let mut a = vec![0.0; n];
        for &(j, c) in &r.coeffs {
            a[j] += c;
        }
        let shift: f64 = (0..n).map(|j| a[j] * p.lower[j]).sum();
        rows.push((a, r.sense, r.rhs - shift));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        rows.push((a, Sense::Le, p.upper[j] - p.lower[j]));
    }
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|v| *v = -*v);
            row.2 = -row.2;
            row.1 = match row.1 {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let art_count = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let total = n + slack_count + art_count;
    let first_art = n + slack_count;
    let mut t = vec![vec![0.0; total + 1]; m];
    let mut basis = vec![0; m];
    let (mut s, mut a) = (n, first_art);
    for (i, (coef, sense, rhs)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(coef);
        t[i][total] = *rhs;
        match sense {
            Sense::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
            Sense::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }

    fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
        let p = t[r][c];
        t[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let f = row[c];
                row.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
            }
        }
        basis[r] = c;
    }

    // Returns false when unbounded.
    fn run(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) -> bool {
        let total = cost.len();
        for _ in 0..100_000 {
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let reduced = cost[j] - t.iter().zip(basis.iter()).map(|(row, &b)| cost[b] * row[j]).sum::<f64>();
                if reduced < -1e-10 {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in t.iter().enumerate() {
                if row[c] > 1e-11 {
                    let ratio = row[total] / row[c];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            pivot(t, basis, r, c);
        }
        panic!("oracle simplex did not terminate");
    }

    if art_count > 0 {
        let mut cost = vec![0.0; total];
        cost[first_art..].iter_mut().for_each(|c| *c = 1.0);
        run(&mut t, &mut basis, &cost, total);
        let infeasibility: f64 = (0..m).filter(|&i| basis[i] >= first_art).map(|i| t[i][total]).sum();
        if infeasibility > 1e-7 {
            return OracleLp::Infeasible;
        }
        for i in 0..m {
            if basis[i] >= first_art {
                if let Some(c) = (0..first_art).find(|&c| t[i][c].abs() > 1e-9) {
                    pivot(&mut t, &mut basis, i, c);
                }
            }
        }
    }
    let mut cost = vec![0.0; total];
    cost[..n].copy_from_slice(&p.costs);
    if !run(&mut t, &mut basis, &cost, first_art) {
        return OracleLp::Unbounded;
    }
    let mut y = vec![0.0; total];
    for i in 0..m {
        y[basis[i]] = t[i][total];
    }
    OracleLp::Optimal((0..n).map(|j| p.costs[j] * (y[j] + p.lower[j])).sum())
}

/// Minimum objective of a pure-binary model by trying every assignment.
pub fn enumerate_binary(model: &MilpModel) -> Option<f64> {
    let n = model.vars.len();
    assert!(n <= 20, "enumeration is for small models");
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
        if model.max_violation(&x) <= 1e-9 {
            let obj = model.objective_value(&x);
            if best.is_none_or(|b| obj < b) {
                best = Some(obj);
            }
        }
    }
    best
}

/// Allowance for rounding when a score lands exactly on the threshold.
pub const SCORE_NOISE: f64 = 1e-9;

/// 1-based rank under "higher score first, ties to the lower index".
pub fn rank(scores: &[f64], item: usize) -> usize {
    1 + (0..scores.len())
        .filter(|&j| j != item && (scores[j] > scores[item] || (scores[j] == scores[item] && j < item)))
        .count()
}

fn scores(model: &EaseModel, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|j| (0..d).map(|l| model.weight(j, l) * x[l]).sum()).collect()
}

/// How the enumeration judges a rank drop.
#[derive(Debug, Clone, Copy)]
pub enum RankRule {
    /// Target rank strictly above `rho` with ties to the lower index.
    Strict,
    /// At least `rho` other items score at least `margin` above the target.
    Margin(f64),
}

/// Smallest ℓ1 distance of a decrease-only binary counterfactual meeting the
/// query's validity rule, by trying every subset of removed interactions.
pub fn enumerate_ce(model: &EaseModel, query: &CeQuery, rule: RankRule) -> Option<f64> {
    let support: Vec<usize> = (0..query.factual.len())
        .filter(|&l| query.factual[l] == 1.0 && !(query.fix_target && l == query.target_item))
        .collect();
    assert!(support.len() <= 16);
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << support.len()) {
        let mut x = query.factual.clone();
        for (b, &l) in support.iter().enumerate() {
            if (mask >> b) & 1 == 1 {
                x[l] = 0.0;
            }
        }
        let s = scores(model, &x);
        let ok = match query.validity {
            Validity::RankDrop { rho } => match rule {
                RankRule::Strict => rank(&s, query.target_item) > rho,
                RankRule::Margin(margin) => {
                    let c = query.target_item;
                    (0..s.len()).filter(|&j| j != c && s[j] >= s[c] + margin).count() >= rho
                }
            },
            Validity::ScoreThreshold { tau } => s[query.target_item] <= tau + SCORE_NOISE,
        };
        if ok {
            let dist = mask.count_ones() as f64;
            if best.is_none_or(|b| dist < b) {
                best = Some(dist);
            }
        }
    }
    best
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        let (pivot_rows, rest) = a.split_at_mut(col + 1);
        let pivot = &pivot_rows[col];
        for (offset, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot[col];
            for (v, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *v -= f * p;
            }
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Ridge regression of column `j` of `x` on the remaining columns: the
/// weights `w` minimizing `|x_j - X w|² + λ|w|²` subject to `w_j = 0`.
pub fn constrained_ridge_column(x: &[Vec<f64>], j: usize, lambda: f64) -> Vec<f64> {
    let d = x[0].len();
    let others: Vec<usize> = (0..d).filter(|&l| l != j).collect();
    let gram: Vec<Vec<f64>> = others
        .iter()
        .map(|&a| {
            others
                .iter()
                .map(|&b| x.iter().map(|row| row[a] * row[b]).sum::<f64>() + if a == b { lambda } else { 0.0 })
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = others.iter().map(|&a| x.iter().map(|row| row[a] * row[j]).sum()).collect();
    let sol = gauss_solve(gram, rhs);
    let mut w = vec![0.0; d];
    for (k, &l) in others.iter().enumerate() {
        w[l] = sol[k];
    }
    w
}

/// Random binary matrix with the given density; every column gets at least
/// one entry.
pub fn random_binary(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Vec<Vec<f64>> {
    let mut x: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| if rng.random::<f64>() < density { 1.0 } else { 0.0 }).collect())
        .collect();
    for c in 0..cols {
        if x.iter().all(|r| r[c] == 0.0) {
            let r = rng.random_range(0..rows);
            x[r][c] = 1.0;
        }
    }
    x
}

/// Log-likelihood of `z` evaluated straight from the node list with
/// log-sum-exp at sum nodes.
pub fn spn_log_likelihood(spn: &Spn, z: &[f64]) -> f64 {
    let mut value: Vec<f64> = Vec::with_capacity(spn.nodes().len());
    for node in spn.nodes() {
        let v = match node {
            SpnNode::Sum { children, log_weights } => {
                let terms: Vec<f64> = children.iter().zip(log_weights).map(|(&c, &w)| w + value[c]).collect();
                let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
            }
            SpnNode::Product { children } => children.iter().map(|&c| value[c]).sum(),
            SpnNode::Bernoulli { feature, p } => {
                if z[*feature] == 1.0 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            }
            SpnNode::Histogram { feature, bins, log_mass } => match bins {
                Bins::Points { values } => {
                    let b = values.iter().position(|&v| v == z[*feature]).expect("value on the support");
                    log_mass[b]
                }
                Bins::Intervals { edges } => {
                    let last = edges.len() - 2;
                    let b = (0..=last)
                        .find(|&b| z[*feature] >= edges[b] && (z[*feature] < edges[b + 1] || b == last))
                        .expect("value inside the edges");
                    log_mass[b] - (edges[b + 1] - edges[b]).ln()
                }
            },
        };
        value.push(v);
    }
    *value.last().expect("non-empty network")
}

/// Every point of a product of discrete feature domains.
pub fn discrete_points(domains: &[FeatureDomain]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for d in domains {
        let values: Vec<f64> = match d {
            FeatureDomain::Binary => vec![0.0, 1.0],
            FeatureDomain::Count { max } => (0..=*max).map(|v| v as f64).collect(),
            FeatureDomain::Unit => panic!("continuous domain cannot be enumerated"),
        };
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Rows from a random mixture of independent per-feature distributions, so
/// that learning finds both clusters and independent groups.
pub fn mixture_rows(rng: &mut ChaCha8Rng, rows: usize, domains: &[FeatureDomain], clusters: usize) -> Vec<Vec<f64>> {
    let params: Vec<Vec<f64>> = (0..clusters)
        .map(|_| domains.iter().map(|_| rng.random_range(0.05..0.95)).collect())
        .collect();
    (0..rows)
        .map(|_| {
            let c = rng.random_range(0..clusters);
            domains
                .iter()
                .zip(&params[c])
                .map(|(d, &p)| match d {
                    FeatureDomain::Binary => f64::from(u8::from(rng.random::<f64>() < p)),
                    FeatureDomain::Count { max } => (0..*max).filter(|_| rng.random::<f64>() < p).count() as f64,
                    FeatureDomain::Unit => (p + rng.random_range(-0.1..0.1f64)).clamp(0.0, 1.0),
                })
                .collect()
        })
        .collect()
}

/// EASE model trained on a binary matrix given as dense rows.
pub fn ease_on(x: &[Vec<f64>], lambda: f64) -> EaseModel {
    let users: Vec<String> = (0..x.len()).map(|u| format!("u{u}")).collect();
    let items: Vec<String> = (0..x[0].len()).map(|i| format!("i{i}")).collect();
    let triplets: Vec<(usize, usize, f64)> = x
        .iter()
        .enumerate()
        .flat_map(|(u, row)| row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(move |(i, &v)| (u, i, v)))
        .collect();
    let m = InteractionMatrix::from_triplets(users, items, triplets, ValueDomain::Binary).expect("valid matrix");
    train_ease(&m, lambda).expect("trainable")
}
