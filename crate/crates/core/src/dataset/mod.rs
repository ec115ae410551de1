//! Interaction data: loading, value-domain cleanup, pruning, category
//! grouping and user fold assignment.

mod categories;
mod folds;
mod load;
mod preprocess;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use categories::{build_category_map, load_item_meta, CategoryMap, CategoryStrategy, ItemAttributes, ItemMeta};
pub use folds::{split_folds, FoldSplit};
pub use load::{load_interactions, read_interactions, CsvSchema};
pub use preprocess::{binarize, normalize_ratings, prune};

/// Admissible values of the stored interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValueDomain {
    /// Values exactly as read from the source, before normalization.
    Raw,
    /// Every stored value is 1.
    Binary,
    /// Every stored value is one of the listed levels (ascending, all > 0).
    RatingLevels(Vec<f64>),
}

impl ValueDomain {
    pub fn is_binary(&self) -> bool {
        matches!(self, ValueDomain::Binary)
    }

    /// Values a counterfactual coordinate may take, including 0.
    pub fn levels_with_zero(&self) -> Vec<f64> {
        match self {
            ValueDomain::Binary | ValueDomain::Raw => vec![0.0, 1.0],
            ValueDomain::RatingLevels(levels) => {
                let mut out = Vec::with_capacity(levels.len() + 1);
                out.push(0.0);
                out.extend(levels.iter().copied());
                out
            }
        }
    }

    fn admits(&self, value: f64) -> bool {
        match self {
            ValueDomain::Raw => value.is_finite(),
            ValueDomain::Binary => value == 1.0,
            ValueDomain::RatingLevels(levels) => levels.iter().any(|l| (l - value).abs() < 1e-12),
        }
    }
}

/// Sparse user-by-item interaction matrix with dense indices.
///
/// Each user row is stored sorted by item index. An absent entry means
/// "no interaction" (value 0).
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    n_items: usize,
    value_domain: ValueDomain,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
}

impl InteractionMatrix {
    /// Builds a matrix from `(user, item, value)` triplets. Duplicate pairs
    /// keep the maximum value.
    pub fn from_triplets(
        user_ids: Vec<String>,
        item_ids: Vec<String>,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        value_domain: ValueDomain,
    ) -> Result<Self> {
        let n_users = user_ids.len();
        let n_items = item_ids.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_users];
        for (u, i, v) in triplets {
            if u >= n_users || i >= n_items {
                return Err(Error::Data(format!("entry ({u}, {i}) outside {n_users}x{n_items} matrix")));
            }
            rows[u].push((i, v));
        }
        for row in &mut rows {
            row.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
            row.dedup_by_key(|e| e.0);
        }
        let m = InteractionMatrix {
            rows,
            n_items,
            value_domain,
            user_ids,
            item_ids,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for (u, row) in self.rows.iter().enumerate() {
            for &(i, v) in row {
                let ok = match self.value_domain {
                    ValueDomain::Raw => v.is_finite(),
                    _ => v > 0.0 && self.value_domain.admits(v),
                };
                if !ok {
                    return Err(Error::Data(format!(
                        "value {v} at ({u}, {i}) not admitted by {:?}",
                        self.value_domain
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn value_domain(&self) -> &ValueDomain {
        &self.value_domain
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn row(&self, user: usize) -> &[(usize, f64)] {
        &self.rows[user]
    }

    pub fn get(&self, user: usize, item: usize) -> f64 {
        let row = &self.rows[user];
        row.binary_search_by_key(&item, |e| e.0).map(|p| row[p].1).unwrap_or(0.0)
    }

    /// The full length-D interaction vector of one user.
    pub fn dense_row(&self, user: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_items];
        for &(i, v) in &self.rows[user] {
            out[i] = v;
        }
        out
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_ids.iter().position(|u| u == id)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|i| i == id)
    }

    /// Iterates `(user, item, value)` over all stored entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&(i, v)| (u, i, v)))
    }

    /// Restriction to a subset of users, keeping all items.
    pub fn select_users(&self, users: &[usize]) -> InteractionMatrix {
        InteractionMatrix {
            rows: users.iter().map(|&u| self.rows[u].clone()).collect(),
            n_items: self.n_items,
            value_domain: self.value_domain.clone(),
            user_ids: users.iter().map(|&u| self.user_ids[u].clone()).collect(),
            item_ids: self.item_ids.clone(),
        }
    }

    pub(crate) fn map_values(&self, domain: ValueDomain, f: impl Fn(f64) -> Option<f64>) -> InteractionMatrix {
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().filter_map(|&(i, v)| f(v).map(|nv| (i, nv))).collect())
            .collect();
        InteractionMatrix {
            rows,
            n_items: self.n_items,
            value_domain: domain,
            user_ids: self.user_ids.clone(),
            item_ids: self.item_ids.clone(),
        }
    }

    /// Writes the index-to-identifier maps as a JSON sidecar.
    pub fn write_id_maps(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct IdMaps<'a> {
            users: &'a [String],
            items: &'a [String],
        }
        let json = serde_json::to_string_pretty(&IdMaps {
            users: &self.user_ids,
            items: &self.item_ids,
        })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub(crate) fn id_lookup(ids: &[String]) -> HashMap<&str, usize> {
        ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }
}
