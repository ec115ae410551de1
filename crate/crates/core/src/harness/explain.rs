use serde::{Deserialize, Serialize};

use super::config::{Cell, ExperimentConfig};
use super::pipeline::{build_query, recommend, Artifacts};
use super::verify::{verify_ce, ValidityReport};
use crate::error::{Error, Result};
use crate::milp::MilpModel;
use crate::mio::{self, CeQuery, CeResult};
use crate::solver::SolveLimits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangedItemId {
    pub item_id: String,
    pub old: f64,
    pub new: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainOutput {
    pub user_id: String,
    pub item_id: String,
    pub fold: usize,
    pub k: usize,
    pub cell: Cell,
    pub in_top_k: bool,
    pub changed: Vec<ChangedItemId>,
    pub result: CeResult,
    pub verification: Option<ValidityReport>,
}

/// A compiled query for one user and item under the configured cell.
pub struct PreparedQuery {
    pub fold: usize,
    pub query: CeQuery,
    pub model: MilpModel,
    pub in_top_k: bool,
}

fn lookup(art: &Artifacts, user_id: &str, item_id: &str) -> Result<(usize, usize)> {
    let m = &art.data.matrix;
    let user = m
        .user_index(user_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown user id `{user_id}`")))?;
    let item = m
        .item_index(item_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown item id `{item_id}`")))?;
    Ok((user, item))
}

pub fn prepare_query(cfg: &ExperimentConfig, art: &Artifacts, user_id: &str, item_id: &str) -> Result<PreparedQuery> {
    let (user, item) = lookup(art, user_id, item_id)?;
    let fold = art.fold_for(user, cfg.sample_from);
    let x = art.data.matrix.dense_row(user);
    let rec = recommend(&art.models[fold], &x, cfg.k)?;
    let in_top_k = rec.top.contains(&item);
    if !in_top_k {
        log::warn!("item `{item_id}` is not in the top-{} of user `{user_id}`", cfg.k);
    }
    let cell = Cell {
        validity: cfg.validity,
        spn_mode: cfg.spn_mode,
    };
    let query = build_query(cfg, &cell, &art.data, &rec, x, item, &art.networks[fold]);
    let model = mio::compile(&query, &art.models[fold], Some(art.spn_context(fold)))?;
    Ok(PreparedQuery {
        fold,
        query,
        model,
        in_top_k,
    })
}

/// Explains why `item_id` is recommended to `user_id` with the configured
/// validity rule and likelihood mode.
pub fn explain_user_item(cfg: &ExperimentConfig, art: &Artifacts, user_id: &str, item_id: &str) -> Result<ExplainOutput> {
    let prepared = prepare_query(cfg, art, user_id, item_id)?;
    let fold = prepared.fold;
    let limits = SolveLimits {
        time_limit_seconds: cfg.time_limit_seconds,
        ..SolveLimits::default()
    };
    let ctx = Some(art.spn_context(fold));
    let result = mio::explain(&prepared.query, &art.models[fold], ctx, &limits)?;
    let verification = result
        .counterfactual
        .as_ref()
        .map(|cf| verify_ce(&art.models[fold], &prepared.query, cf))
        .transpose()?;
    let ids = art.data.matrix.item_ids();
    Ok(ExplainOutput {
        user_id: user_id.to_string(),
        item_id: item_id.to_string(),
        fold,
        k: cfg.k,
        cell: Cell {
            validity: cfg.validity,
            spn_mode: cfg.spn_mode,
        },
        in_top_k: prepared.in_top_k,
        changed: result
            .changed_items
            .iter()
            .map(|c| ChangedItemId {
                item_id: ids[c.item].clone(),
                old: c.old,
                new: c.new,
            })
            .collect(),
        result,
        verification,
    })
}
