//! Browser demo: trains a recommender and a likelihood network on seeded
//! synthetic data, then serves top-k lists, counterfactual explanations and
//! log-likelihoods to a static page as JSON.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use cfrec::dataset::{build_category_map, CategoryMap, CategoryStrategy, InteractionMatrix};
use cfrec::ease::{self, EaseModel};
use cfrec::mio::{self, CeQuery, CeStatus, SpnContext, SpnMode, Validity};
use cfrec::solver::SolveLimits;
use cfrec::spn::{aggregate, feature_domains, learn_spn, Aggregator, Spn, SpnParams};
use cfrec::synth::{self, SynthConfig};
use cfrec::{Error, Result};

const LAMBDA: f64 = 100.0;
const TIME_LIMIT_SECONDS: f64 = 20.0;

/// Trained state behind the page.
pub struct Session {
    matrix: InteractionMatrix,
    categories: CategoryMap,
    model: EaseModel,
    spn: Spn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredItem {
    pub id: String,
    pub category: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendOutput {
    pub user: String,
    pub history: Vec<ScoredItem>,
    pub top: Vec<ScoredItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainOutput {
    pub user: String,
    pub target: String,
    pub status: CeStatus,
    /// Items the user would have to drop, with their categories.
    pub removed: Vec<ScoredItem>,
    pub rank_before: usize,
    pub rank_after: Option<usize>,
    pub log_likelihood_before: f64,
    pub log_likelihood_after: Option<f64>,
    pub median_log_likelihood: f64,
    pub solve_seconds: f64,
    pub nodes_explored: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryFeature {
    pub category: String,
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikelihoodOutput {
    pub user: String,
    pub features: Vec<CategoryFeature>,
    pub log_likelihood: f64,
    pub median_log_likelihood: f64,
}

impl Session {
    pub fn train(seed: u64, users: usize, items: usize, categories: usize) -> Result<Self> {
        let data = synth::generate(&SynthConfig {
            users,
            items,
            categories,
            seed,
            ..SynthConfig::default()
        })?;
        let matrix = data.binary_matrix()?;
        let categories = build_category_map(matrix.item_ids(), &data.meta, CategoryStrategy::SingleCategory)?;
        let model = ease::train_ease(&matrix, LAMBDA)?;
        let rows = (0..matrix.n_users())
            .map(|u| Ok(aggregate(&matrix.dense_row(u), &categories, Aggregator::Disjunction)?.values))
            .collect::<Result<Vec<_>>>()?;
        let params = SpnParams {
            min_instances_split: 50,
            seed,
            ..SpnParams::default()
        };
        let spn = learn_spn(&rows, &feature_domains(&categories, Aggregator::Disjunction), Aggregator::Disjunction, &params)?;
        Ok(Session {
            matrix,
            categories,
            model,
            spn,
        })
    }

    pub fn user_count(&self) -> usize {
        self.matrix.n_users()
    }

    fn user(&self, user: usize) -> Result<Vec<f64>> {
        if user >= self.matrix.n_users() {
            return Err(Error::InvalidArgument(format!("user {user} outside 0..{}", self.matrix.n_users())));
        }
        Ok(self.matrix.dense_row(user))
    }

    fn category_of(&self, item: usize) -> String {
        self.categories
            .members
            .iter()
            .position(|m| m.binary_search(&item).is_ok())
            .map(|c| self.categories.labels[c].clone())
            .unwrap_or_default()
    }

    fn scored(&self, item: usize, scores: &[f64]) -> ScoredItem {
        ScoredItem {
            id: self.matrix.item_ids()[item].clone(),
            category: self.category_of(item),
            score: scores[item],
        }
    }

    fn log_likelihood(&self, x: &[f64]) -> Result<f64> {
        self.spn.log_likelihood(&aggregate(x, &self.categories, Aggregator::Disjunction)?.values)
    }

    /// Top-k over all items, so items already in the history may appear.
    pub fn recommend(&self, user: usize, k: usize) -> Result<RecommendOutput> {
        let x = self.user(user)?;
        let scores = self.model.score(&x)?;
        let top = ease::top_k(&scores, k.clamp(1, scores.len()), &Default::default())?;
        Ok(RecommendOutput {
            user: self.matrix.user_ids()[user].clone(),
            history: self.matrix.row(user).iter().map(|&(i, _)| self.scored(i, &scores)).collect(),
            top: top.into_iter().map(|i| self.scored(i, &scores)).collect(),
        })
    }

    /// Smallest set of removals that pushes the item at `position` (1-based)
    /// of the user's top-k out of it. `plausibility` is `none`, `threshold`
    /// (stay above the training median) or `optimize` (trade distance
    /// against likelihood with weight `alpha`).
    pub fn explain(&self, user: usize, k: usize, position: usize, plausibility: &str, alpha: f64) -> Result<ExplainOutput> {
        let rec = self.recommend(user, k)?;
        let entry = rec
            .top
            .get(position.wrapping_sub(1))
            .ok_or_else(|| Error::InvalidArgument(format!("position {position} outside 1..={}", rec.top.len())))?;
        let target = self.matrix.item_index(&entry.id).expect("recommended items exist");
        let x = self.user(user)?;
        let k = rec.top.len();
        let mut query = CeQuery::new(x.clone(), target, Validity::RankDrop { rho: k }, self.matrix.value_domain().clone(), k);
        query.spn_mode = match plausibility {
            "none" => SpnMode::NoSpn,
            "threshold" => SpnMode::Threshold {
                min_ll: self.spn.median_train_ll(),
            },
            "optimize" => SpnMode::Optimize { alpha },
            other => return Err(Error::InvalidArgument(format!("unknown plausibility mode `{other}`"))),
        };
        let ctx = SpnContext {
            spn: &self.spn,
            categories: &self.categories,
        };
        let limits = SolveLimits {
            time_limit_seconds: TIME_LIMIT_SECONDS,
            ..SolveLimits::default()
        };
        let result = mio::explain(&query, &self.model, Some(ctx), &limits)?;
        let scores = self.model.score(&x)?;
        let log_likelihood_after = match &result.counterfactual {
            Some(cf) => Some(self.log_likelihood(cf)?),
            None => None,
        };
        Ok(ExplainOutput {
            user: rec.user,
            target: entry.id.clone(),
            status: result.status,
            removed: result.changed_items.iter().map(|c| self.scored(c.item, &scores)).collect(),
            rank_before: result.target_rank_before,
            rank_after: result.target_rank_after,
            log_likelihood_before: self.log_likelihood(&x)?,
            log_likelihood_after,
            median_log_likelihood: self.spn.median_train_ll(),
            solve_seconds: result.solve_seconds,
            nodes_explored: result.nodes_explored,
        })
    }

    pub fn likelihood(&self, user: usize) -> Result<LikelihoodOutput> {
        let x = self.user(user)?;
        let z = aggregate(&x, &self.categories, Aggregator::Disjunction)?.values;
        Ok(LikelihoodOutput {
            user: self.matrix.user_ids()[user].clone(),
            features: self
                .categories
                .labels
                .iter()
                .zip(&z)
                .map(|(label, &v)| CategoryFeature {
                    category: label.clone(),
                    present: v > 0.0,
                })
                .collect(),
            log_likelihood: self.spn.log_likelihood(&z)?,
            median_log_likelihood: self.spn.median_train_ll(),
        })
    }
}

fn to_js<T: Serialize>(value: Result<T>) -> std::result::Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// JavaScript handle; every query returns a JSON string.
#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, users: usize, items: usize, categories: usize) -> std::result::Result<Demo, JsError> {
        let session = Session::train(seed, users, items, categories).map_err(|e| JsError::new(&e.to_string()))?;
        Ok(Demo { session })
    }

    #[wasm_bindgen(js_name = userCount)]
    pub fn user_count(&self) -> usize {
        self.session.user_count()
    }

    pub fn recommend(&self, user: usize, k: usize) -> std::result::Result<String, JsError> {
        to_js(self.session.recommend(user, k))
    }

    pub fn explain(&self, user: usize, k: usize, position: usize, plausibility: &str, alpha: f64) -> std::result::Result<String, JsError> {
        to_js(self.session.explain(user, k, position, plausibility, alpha))
    }

    pub fn likelihood(&self, user: usize) -> std::result::Result<String, JsError> {
        to_js(self.session.likelihood(user))
    }
}
