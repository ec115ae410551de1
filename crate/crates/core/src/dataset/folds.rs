use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::InteractionMatrix;
use crate::error::{Error, Result};

/// Assignment of users to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_count: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldSplit {
    pub fn users_in(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&u| self.assignments[u] == fold).collect()
    }

    /// Users outside `fold`; the training set for that fold's recommender.
    pub fn users_outside(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&u| self.assignments[u] != fold).collect()
    }
}

/// Shuffles users with a seeded generator and deals them round-robin.
pub fn split_folds(m: &InteractionMatrix, fold_count: usize, seed: u64) -> Result<FoldSplit> {
    let n = m.n_users();
    if fold_count < 2 || fold_count > n {
        return Err(Error::InvalidArgument(format!("fold_count {fold_count} must lie in 2..={n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (pos, &u) in order.iter().enumerate() {
        assignments[u] = pos % fold_count;
    }
    Ok(FoldSplit {
        fold_count,
        assignments,
        seed,
    })
}
