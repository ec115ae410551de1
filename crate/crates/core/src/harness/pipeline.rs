use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Cell, ExperimentConfig, SampleSource, SpnModeConfig, ValidityKind};
use crate::dataset::{
    binarize, build_category_map, load_interactions, load_item_meta, normalize_ratings, prune, split_folds,
    CategoryMap, FoldSplit, InteractionMatrix,
};
use crate::ease::{top_k, train_ease, EaseModel};
use crate::error::{Error, Result};
use crate::mio::{CeQuery, SpnContext, SpnMode, Validity};
use crate::spn::{aggregate, feature_domains, learn_spn, Spn};

/// Preprocessed interactions and the item grouping used for aggregation.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub matrix: InteractionMatrix,
    pub categories: CategoryMap,
}

/// Loads, normalizes (or binarizes), prunes and groups the interactions.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.validate()?;
    // Read metadata first so a broken metadata file fails before any work.
    let meta = cfg.item_meta.as_deref().map(load_item_meta).transpose()?;
    let raw = load_interactions(&cfg.interactions, &cfg.schema)?;
    let scaled = if cfg.binarize {
        binarize(&raw)
    } else {
        normalize_ratings(&raw, cfg.rating_scale)?
    };
    let matrix = prune(&scaled, cfg.min_user_interactions, cfg.min_item_interactions)?;
    let categories = match &meta {
        Some(meta) => build_category_map(matrix.item_ids(), meta, cfg.category_strategy)?,
        None => {
            log::warn!("no item metadata configured; every item becomes its own category");
            CategoryMap::identity(matrix.n_items())
        }
    };
    log::info!(
        "{} users, {} items, {} interactions, {} categories",
        matrix.n_users(),
        matrix.n_items(),
        matrix.nnz(),
        categories.n_categories()
    );
    Ok(PreparedData { matrix, categories })
}

fn artifact_path(dir: &Path, kind: &str, fold: usize, hash: &str) -> PathBuf {
    dir.join(format!("{kind}_fold{fold}_{hash}.json"))
}

/// Paths written by [`cmd_train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config_hash: String,
    pub folds_file: PathBuf,
    pub ease_files: Vec<PathBuf>,
    pub spn_files: Vec<PathBuf>,
    pub median_train_ll: Vec<f64>,
}

/// Trains one recommender and one network per fold on the users outside it.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainSummary> {
    let data = prepare_data(cfg)?;
    let split = split_folds(&data.matrix, cfg.fold_count, cfg.seed)?;
    let hash = cfg.training_hash();
    let dir = cfg.resolved_output_dir();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let folds_file = dir.join(format!("folds_{hash}.json"));
    fs::write(&folds_file, serde_json::to_string(&split)?).map_err(|e| Error::io(&folds_file, e))?;
    let domains = feature_domains(&data.categories, cfg.aggregator);
    let mut summary = TrainSummary {
        config_hash: hash.clone(),
        folds_file,
        ease_files: Vec::new(),
        spn_files: Vec::new(),
        median_train_ll: Vec::new(),
    };
    for fold in 0..cfg.fold_count {
        let train = data.matrix.select_users(&split.users_outside(fold));
        let ease = train_ease(&train, cfg.lambda)?;
        let rows = (0..train.n_users())
            .map(|u| aggregate(&train.dense_row(u), &data.categories, cfg.aggregator).map(|a| a.values))
            .collect::<Result<Vec<_>>>()?;
        let spn = learn_spn(&rows, &domains, cfg.aggregator, &cfg.spn)?;
        let ease_path = artifact_path(&dir, "ease", fold, &hash);
        let spn_path = artifact_path(&dir, "spn", fold, &hash);
        ease.save(&ease_path)?;
        spn.save(&spn_path)?;
        log::info!(
            "fold {fold}: trained on {} users, {} network nodes, median log-likelihood {:.4}",
            train.n_users(),
            spn.nodes().len(),
            spn.median_train_ll()
        );
        summary.ease_files.push(ease_path);
        summary.spn_files.push(spn_path);
        summary.median_train_ll.push(spn.median_train_ll());
    }
    Ok(summary)
}

/// Data plus the trained per-fold models.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub data: PreparedData,
    pub split: FoldSplit,
    pub models: Vec<EaseModel>,
    pub networks: Vec<Spn>,
    pub config_hash: String,
}

impl Artifacts {
    /// Fold whose recommender serves `user` under the sampling rule.
    pub fn fold_for(&self, user: usize, source: SampleSource) -> usize {
        let own = self.split.assignments[user];
        match source {
            SampleSource::HeldOut => own,
            SampleSource::Training => (own + 1) % self.split.fold_count,
        }
    }

    pub fn spn_context(&self, fold: usize) -> SpnContext<'_> {
        SpnContext {
            spn: &self.networks[fold],
            categories: &self.data.categories,
        }
    }
}

/// Reloads what [`cmd_train`] wrote for this configuration.
pub fn load_artifacts(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let data = prepare_data(cfg)?;
    let hash = cfg.training_hash();
    let dir = cfg.resolved_output_dir();
    let folds_file = dir.join(format!("folds_{hash}.json"));
    if !folds_file.is_file() {
        return Err(Error::Config(format!(
            "no trained artifacts for this configuration in {} (run `train` first)",
            dir.display()
        )));
    }
    let text = fs::read_to_string(&folds_file).map_err(|e| Error::io(&folds_file, e))?;
    let split: FoldSplit = serde_json::from_str(&text)?;
    if split.assignments.len() != data.matrix.n_users() {
        return Err(Error::Data("fold file does not match the prepared data".into()));
    }
    let mut models = Vec::new();
    let mut networks = Vec::new();
    for fold in 0..cfg.fold_count {
        let model = EaseModel::load(&artifact_path(&dir, "ease", fold, &hash))?;
        if model.item_count() != data.matrix.n_items() {
            return Err(Error::Data(format!("fold {fold} recommender does not match the item count")));
        }
        models.push(model);
        networks.push(Spn::load(&artifact_path(&dir, "spn", fold, &hash))?);
    }
    Ok(Artifacts {
        data,
        split,
        models,
        networks,
        config_hash: hash,
    })
}

/// Scores of a factual vector and its top-k items (ranked over all items).
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub scores: Vec<f64>,
    pub top: Vec<usize>,
}

pub fn recommend(model: &EaseModel, x: &[f64], k: usize) -> Result<Recommendation> {
    let scores = model.score(x)?;
    let top = top_k(&scores, k.min(scores.len()), &BTreeSet::new())?;
    Ok(Recommendation { scores, top })
}

/// Builds the query for `cell` on one factual vector and target.
pub fn build_query(
    cfg: &ExperimentConfig,
    cell: &Cell,
    data: &PreparedData,
    rec: &Recommendation,
    x: Vec<f64>,
    target: usize,
    spn: &Spn,
) -> CeQuery {
    let validity = match cell.validity {
        ValidityKind::RankDrop => Validity::RankDrop { rho: cfg.k },
        ValidityKind::ScoreThreshold => Validity::ScoreThreshold {
            tau: rec.scores[*rec.top.last().expect("k >= 1")],
        },
    };
    let mut query = CeQuery::new(x, target, validity, data.matrix.value_domain().clone(), cfg.k);
    query.fix_target = cfg.fix_target;
    query.spn_mode = match cell.spn_mode {
        SpnModeConfig::None => SpnMode::NoSpn,
        SpnModeConfig::Threshold { min_ll } => SpnMode::Threshold {
            min_ll: min_ll.unwrap_or(spn.median_train_ll()),
        },
        SpnModeConfig::Optimize { alpha } => SpnMode::Optimize { alpha },
    };
    query
}
