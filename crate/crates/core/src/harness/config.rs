use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{CategoryStrategy, CsvSchema};
use crate::error::{Error, Result};
use crate::spn::{Aggregator, SpnParams};

/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "CFREC_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityKind {
    /// The target must fall below rank k.
    RankDrop,
    /// The target's score must not exceed the factual k-th score.
    ScoreThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpnModeConfig {
    None,
    /// `min_ll` defaults to the network's median training log-likelihood.
    Threshold {
        #[serde(default)]
        min_ll: Option<f64>,
    },
    Optimize {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

fn default_alpha() -> f64 {
    0.1
}

/// Which users explanations are generated for, relative to the fold whose
/// recommender is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    /// Users the recommender never saw.
    HeldOut,
    Training,
}

/// One column of the benchmark matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub validity: ValidityKind,
    pub spn_mode: SpnModeConfig,
}

impl Cell {
    pub fn label(&self) -> String {
        let v = match self.validity {
            ValidityKind::RankDrop => "rank",
            ValidityKind::ScoreThreshold => "score",
        };
        let m = match self.spn_mode {
            SpnModeConfig::None => "no_spn".to_string(),
            SpnModeConfig::Threshold { min_ll: None } => "threshold_median".to_string(),
            SpnModeConfig::Threshold { min_ll: Some(t) } => format!("threshold_{t}"),
            SpnModeConfig::Optimize { alpha } => format!("optimize_{alpha}"),
        };
        format!("{v}/{m}")
    }
}

fn default_cells() -> Vec<Cell> {
    let modes = [
        SpnModeConfig::None,
        SpnModeConfig::Threshold { min_ll: None },
        SpnModeConfig::Optimize { alpha: 0.1 },
    ];
    [ValidityKind::RankDrop, ValidityKind::ScoreThreshold]
        .into_iter()
        .flat_map(|validity| modes.into_iter().map(move |spn_mode| Cell { validity, spn_mode }))
        .collect()
}

/// Everything a run needs, read from a JSON file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub interactions: PathBuf,
    pub schema: CsvSchema,
    /// `item_id,category,tags,year` CSV; without it every item is its own
    /// category.
    pub item_meta: Option<PathBuf>,
    /// Treat every interaction as 1; otherwise ratings are normalized.
    pub binarize: bool,
    pub rating_scale: u32,
    pub min_user_interactions: usize,
    pub min_item_interactions: usize,
    pub category_strategy: CategoryStrategy,
    pub aggregator: Aggregator,
    pub spn: SpnParams,
    pub lambda: f64,
    pub k: usize,
    /// Used by `explain`, `export-mps` and `verify`.
    pub validity: ValidityKind,
    pub spn_mode: SpnModeConfig,
    /// Benchmark matrix.
    pub cells: Vec<Cell>,
    pub users_sampled: usize,
    pub items_per_user: usize,
    pub fold_count: usize,
    pub sample_from: SampleSource,
    pub fix_target: bool,
    pub time_limit_seconds: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Benchmark worker threads.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            interactions: PathBuf::new(),
            schema: CsvSchema::default(),
            item_meta: None,
            binarize: true,
            rating_scale: 5,
            min_user_interactions: 5,
            min_item_interactions: 5,
            category_strategy: CategoryStrategy::SingleCategory,
            aggregator: Aggregator::Disjunction,
            spn: SpnParams::default(),
            lambda: 100.0,
            k: 5,
            validity: ValidityKind::RankDrop,
            spn_mode: SpnModeConfig::None,
            cells: default_cells(),
            users_sampled: 50,
            items_per_user: 3,
            fold_count: 3,
            sample_from: SampleSource::HeldOut,
            fix_target: false,
            time_limit_seconds: 600.0,
            seed: 0,
            output_dir: PathBuf::from("cfrec-out"),
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // Relative data paths are taken relative to the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.interactions.is_relative() && !cfg.interactions.as_os_str().is_empty() {
            cfg.interactions = base.join(&cfg.interactions);
        }
        if let Some(meta) = cfg.item_meta.as_mut() {
            if meta.is_relative() {
                *meta = base.join(&*meta);
            }
        }
        Ok(cfg)
    }

    /// Output directory after applying the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    /// Checks values and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.interactions.as_os_str().is_empty() {
            return bad("`interactions` must name the interaction CSV".into());
        }
        if !self.interactions.is_file() {
            return bad(format!("interaction file {} does not exist", self.interactions.display()));
        }
        if let Some(meta) = &self.item_meta {
            if !meta.is_file() {
                return bad(format!("item metadata file {} does not exist", meta.display()));
            }
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.users_sampled == 0 {
            return bad("users_sampled must be at least 1".into());
        }
        if self.items_per_user == 0 || self.items_per_user > self.k {
            return bad(format!("items_per_user must be in 1..={}", self.k));
        }
        if self.fold_count < 2 {
            return bad("fold_count must be at least 2".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive".into());
        }
        if self.time_limit_seconds.is_nan() || self.time_limit_seconds <= 0.0 {
            return bad("time_limit_seconds must be positive".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !self.binarize && self.aggregator.requires_binary_input() {
            return bad(format!(
                "{:?} aggregation needs binary interactions; set `binarize` or use `mean`",
                self.aggregator
            ));
        }
        if !self.binarize && self.rating_scale == 0 {
            return bad("rating_scale must be positive".into());
        }
        let modes = self.cells.iter().map(|c| c.spn_mode).chain([self.spn_mode]);
        for mode in modes {
            if let SpnModeConfig::Optimize { alpha } = mode {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return bad(format!("alpha = {alpha} must be non-negative"));
                }
            }
        }
        Ok(())
    }

    /// Short digest of every setting that affects trained artifacts.
    pub fn training_hash(&self) -> String {
        let key = serde_json::json!({
            "interactions": self.interactions,
            "schema": self.schema,
            "item_meta": self.item_meta,
            "binarize": self.binarize,
            "rating_scale": self.rating_scale,
            "min_user_interactions": self.min_user_interactions,
            "min_item_interactions": self.min_item_interactions,
            "category_strategy": self.category_strategy,
            "aggregator": self.aggregator,
            "spn": self.spn,
            "lambda": self.lambda,
            "fold_count": self.fold_count,
            "seed": self.seed,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}
