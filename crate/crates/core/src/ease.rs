//! Item-item linear recommender with a closed-form ridge solution and a
//! zero diagonal. The score of item `j` for an interaction vector `x` is the
//! dot product of row `j` of the weight matrix with `x`.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::InteractionMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 100.0;
pub const DEFAULT_MAX_ITEMS: usize = 20_000;
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EaseModel {
    format_version: u32,
    lambda: f64,
    item_count: usize,
    /// Row-major `item_count x item_count`; row `j` scores item `j`.
    weights: Vec<f64>,
}

/// Per-item score interval implied by per-coordinate input bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn train_ease(x: &InteractionMatrix, lambda: f64) -> Result<EaseModel> {
    train_ease_with_limit(x, lambda, DEFAULT_MAX_ITEMS)
}

/// Solves `(XᵀX + λI)⁻¹` by Cholesky and rescales its rows so that each
/// item's weights reproduce the zero-diagonal ridge regression of that item
/// on all others.
pub fn train_ease_with_limit(x: &InteractionMatrix, lambda: f64, max_items: usize) -> Result<EaseModel> {
    let d = x.n_items();
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge penalty must be positive, got {lambda}")));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 items, got {d}")));
    }
    if d > max_items {
        return Err(Error::InvalidArgument(format!(
            "{d} items exceeds the dense-model limit of {max_items}"
        )));
    }
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for u in 0..x.n_users() {
        let row = x.row(u);
        for &(a, va) in row {
            for &(b, vb) in row {
                gram[(a, b)] += va * vb;
            }
        }
    }
    for i in 0..d {
        gram[(i, i)] += lambda;
    }
    let precision = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("gram matrix is not positive definite".into()))?
        .inverse();

    let mut weights = vec![0.0; d * d];
    for j in 0..d {
        let pjj = precision[(j, j)];
        for l in 0..d {
            if l != j {
                weights[j * d + l] = -precision[(j, l)] / pjj;
            }
        }
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numerical("non-finite weight after inversion".into()));
    }
    Ok(EaseModel {
        format_version: FORMAT_VERSION,
        lambda,
        item_count: d,
        weights,
    })
}

impl EaseModel {
    /// Wraps an explicit weight matrix, kept as given (trained models have
    /// a zero diagonal, hand-built ones need not).
    pub fn from_weights(weights: Vec<Vec<f64>>, lambda: f64) -> Result<Self> {
        let d = weights.len();
        if weights.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("weight matrix must be square".into()));
        }
        let flat: Vec<f64> = weights.into_iter().flatten().collect();
        if flat.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        Ok(EaseModel {
            format_version: FORMAT_VERSION,
            lambda,
            item_count: d,
            weights: flat,
        })
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weight(&self, item: usize, input: usize) -> f64 {
        self.weights[item * self.item_count + input]
    }

    /// Scoring row of one item.
    pub fn row(&self, item: usize) -> &[f64] {
        let d = self.item_count;
        &self.weights[item * d..(item + 1) * d]
    }

    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.item_count {
            return Err(Error::Dimension {
                expected: self.item_count,
                got: x.len(),
            });
        }
        let support: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|e| e.1 != 0.0).collect();
        Ok((0..self.item_count)
            .map(|j| {
                let row = self.row(j);
                support.iter().map(|&(l, v)| row[l] * v).sum()
            })
            .collect())
    }

    /// Interval arithmetic over the box `[lower_l, upper_l]`.
    pub fn score_bounds(&self, lower: &[f64], upper: &[f64]) -> Result<ScoreBounds> {
        let d = self.item_count;
        if lower.len() != d || upper.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: lower.len().min(upper.len()),
            });
        }
        if let Some(l) = (0..d).find(|&l| lower[l] > upper[l]) {
            return Err(Error::InvalidArgument(format!("empty bound interval for item {l}")));
        }
        let mut min = vec![0.0; d];
        let mut max = vec![0.0; d];
        for j in 0..d {
            let row = self.row(j);
            let (mut lo, mut hi) = (0.0, 0.0);
            for l in 0..d {
                let w = row[l];
                if w >= 0.0 {
                    hi += w * upper[l];
                    lo += w * lower[l];
                } else {
                    hi += w * lower[l];
                    lo += w * upper[l];
                }
            }
            min[j] = lo;
            max[j] = hi;
        }
        Ok(ScoreBounds { min, max })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: EaseModel = serde_json::from_str(&text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported model format version {}", model.format_version)));
        }
        if model.weights.len() != model.item_count * model.item_count {
            return Err(Error::Data("weight matrix size does not match item count".into()));
        }
        Ok(model)
    }
}

/// The `k` highest scores outside `exclude`, descending; ties go to the lower
/// index.
pub fn top_k(scores: &[f64], k: usize, exclude: &BTreeSet<usize>) -> Result<Vec<usize>> {
    let available = scores.len() - exclude.iter().filter(|&&i| i < scores.len()).count();
    if k == 0 || k > available {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={available}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).filter(|i| !exclude.contains(i)).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// 1-based position of `item` in the full ranking under the `top_k` tie rule.
pub fn rank_of(scores: &[f64], item: usize) -> usize {
    let target = scores[item];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| j != item && (s > target || (s == target && j < item)))
        .count()
}
