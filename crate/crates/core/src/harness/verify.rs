//! Independent validity check of a counterfactual. Only the recommender's
//! scoring is shared with the optimization code; ranking and rule checks are
//! re-implemented here.

use serde::{Deserialize, Serialize};

use crate::dataset::ValueDomain;
use crate::ease::EaseModel;
use crate::error::{Error, Result};
use crate::mio::{CeQuery, Validity};

/// Slack allowed on the score threshold, matching solver feasibility.
pub const SCORE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// 1-based rank of the target after re-scoring.
    pub target_rank: usize,
    pub left_top_k: bool,
    pub decrease_only_ok: bool,
    pub domain_ok: bool,
    /// Score variant: whether the target's score is at most the threshold.
    pub score_ok: Option<bool>,
    /// The query's validity rule holds and every compliance check passes.
    pub valid: bool,
}

pub fn verify_ce(model: &EaseModel, query: &CeQuery, counterfactual: &[f64]) -> Result<ValidityReport> {
    let d = model.item_count();
    if counterfactual.len() != d || query.factual.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: counterfactual.len(),
        });
    }
    let scores = model.score(counterfactual)?;
    let c = query.target_item;
    let mut ahead = 0;
    for (j, &s) in scores.iter().enumerate() {
        if j == c {
            continue;
        }
        if s > scores[c] || (s == scores[c] && j < c) {
            ahead += 1;
        }
    }
    let target_rank = ahead + 1;
    let left_top_k = target_rank > query.k_context;
    let decrease_only_ok = !query.decrease_only || counterfactual.iter().zip(&query.factual).all(|(a, b)| a <= b);
    let domain_ok = counterfactual.iter().zip(&query.factual).all(|(&v, &x)| match &query.domain {
        ValueDomain::Binary => v == 0.0 || v == 1.0,
        ValueDomain::RatingLevels(levels) => v == 0.0 || levels.iter().any(|&l| (l - v).abs() < 1e-12),
        ValueDomain::Raw => v == 0.0 || v == x,
    });
    let fixed_ok = !query.fix_target || counterfactual[c] == query.factual[c];
    let score_ok = match query.validity {
        Validity::ScoreThreshold { tau } => Some(scores[c] <= tau + SCORE_TOLERANCE),
        Validity::RankDrop { .. } => None,
    };
    let rule = match query.validity {
        Validity::RankDrop { rho } => target_rank > rho,
        Validity::ScoreThreshold { .. } => score_ok == Some(true),
    };
    Ok(ValidityReport {
        target_rank,
        left_top_k,
        decrease_only_ok,
        domain_ok,
        score_ok,
        valid: rule && decrease_only_ok && domain_ok && fixed_ok,
    })
}
