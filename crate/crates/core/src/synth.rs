//! Seeded synthetic interaction data with category structure, for demos,
//! tests and benchmarks at desk scale.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionMatrix, ItemAttributes, ItemMeta, ValueDomain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub categories: usize,
    /// Mean interactions per user.
    pub mean_interactions: f64,
    /// Share of a user's interactions drawn from their favourite categories.
    pub affinity: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            users: 500,
            items: 200,
            categories: 15,
            mean_interactions: 8.0,
            affinity: 0.8,
            seed: 7,
        }
    }
}

/// Generated ratings on a 1..=5 scale plus item metadata.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub ratings: Vec<(String, String, f64)>,
    pub meta: ItemMeta,
    pub item_ids: Vec<String>,
}

fn item_id(i: usize) -> String {
    format!("i{i:04}")
}

fn user_id(u: usize) -> String {
    format!("u{u:04}")
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    if cfg.users == 0 || cfg.items < 2 || cfg.categories == 0 || cfg.categories > cfg.items {
        return Err(Error::Config(
            "synthetic data needs users >= 1, items >= 2 and 1 <= categories <= items".into(),
        ));
    }
    if cfg.mean_interactions.is_nan() || cfg.mean_interactions < 1.0 || !(0.0..=1.0).contains(&cfg.affinity) {
        return Err(Error::Config("mean_interactions must be >= 1 and affinity in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let category_of: Vec<usize> = (0..cfg.items).map(|i| i % cfg.categories).collect();
    let mut popularity: Vec<f64> = (0..cfg.items).map(|r| 1.0 / (r as f64 + 1.0).powf(0.7)).collect();
    // Shuffle popularity across items.
    for i in (1..popularity.len()).rev() {
        let j = rng.random_range(0..=i);
        popularity.swap(i, j);
    }
    let members: Vec<Vec<usize>> = (0..cfg.categories)
        .map(|c| (0..cfg.items).filter(|&i| category_of[i] == c).collect())
        .collect();
    let sampler = |items: &[usize]| WeightedIndex::new(items.iter().map(|&i| popularity[i])).expect("positive weights");
    let global: Vec<usize> = (0..cfg.items).collect();
    let global_pick = sampler(&global);
    let category_picks: Vec<WeightedIndex<f64>> = members.iter().map(|m| sampler(m)).collect();

    let mut ratings = Vec::new();
    let max_items = (cfg.mean_interactions * 3.0).ceil() as usize;
    for u in 0..cfg.users {
        let favourites = [rng.random_range(0..cfg.categories), rng.random_range(0..cfg.categories)];
        let p_stop = 1.0 / cfg.mean_interactions;
        let mut count = 1;
        while count < max_items && rng.random::<f64>() > p_stop {
            count += 1;
        }
        let count = count.clamp(3, cfg.items);
        let mut chosen = BTreeSet::new();
        let mut attempts = 0;
        while chosen.len() < count && attempts < 50 * count {
            attempts += 1;
            let item = if rng.random::<f64>() < cfg.affinity {
                let c = favourites[rng.random_range(0..2)];
                members[c][category_picks[c].sample(&mut rng)]
            } else {
                global_pick.sample(&mut rng)
            };
            chosen.insert(item);
        }
        for item in chosen {
            let liked = favourites.contains(&category_of[item]);
            let rating = if liked {
                rng.random_range(3..=5)
            } else {
                rng.random_range(1..=4)
            };
            ratings.push((user_id(u), item_id(item), rating as f64));
        }
    }

    let mut items = HashMap::new();
    for (i, &c) in category_of.iter().enumerate() {
        let mut tags = vec![format!("genre{c:02}")];
        if rng.random::<f64>() < 0.3 {
            tags.push(format!("genre{:02}", rng.random_range(0..cfg.categories)));
            tags.dedup();
        }
        items.insert(
            item_id(i),
            ItemAttributes {
                category: Some(format!("cat{c:02}")),
                tags,
                year: Some(1990 + (c as i32 * 7 + rng.random_range(0..10)) % 30),
            },
        );
    }
    Ok(SynthData {
        ratings,
        meta: ItemMeta {
            items,
            has_category: true,
            has_tags: true,
            has_year: true,
        },
        item_ids: (0..cfg.items).map(item_id).collect(),
    })
}

impl SynthData {
    fn matrix(&self, value: impl Fn(f64) -> f64, domain: ValueDomain) -> Result<InteractionMatrix> {
        let mut users: Vec<String> = self.ratings.iter().map(|(u, _, _)| u.clone()).collect();
        users.dedup();
        let user_index = InteractionMatrix::id_lookup(&users);
        let item_index = InteractionMatrix::id_lookup(&self.item_ids);
        let triplets: Vec<(usize, usize, f64)> = self
            .ratings
            .iter()
            .map(|(u, i, r)| (user_index[u.as_str()], item_index[i.as_str()], value(*r)))
            .collect();
        InteractionMatrix::from_triplets(users, self.item_ids.clone(), triplets, domain)
    }

    /// Implicit-feedback matrix (every generated interaction becomes 1).
    pub fn binary_matrix(&self) -> Result<InteractionMatrix> {
        self.matrix(|_| 1.0, ValueDomain::Binary)
    }

    /// Ratings left on their 1..=5 scale.
    pub fn rating_matrix(&self) -> Result<InteractionMatrix> {
        self.matrix(|r| r, ValueDomain::Raw)
    }

    /// Writes `interactions.csv` (user_id,item_id,rating) and `items.csv`
    /// (item_id,category,tags,year) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut out = String::from("user_id,item_id,rating\n");
        for (u, i, r) in &self.ratings {
            let _ = writeln!(out, "{u},{i},{r}");
        }
        let path = dir.join("interactions.csv");
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        let mut out = String::from("item_id,category,tags,year\n");
        for id in &self.item_ids {
            let a = &self.meta.items[id];
            let _ = writeln!(
                out,
                "{id},{},{},{}",
                a.category.as_deref().unwrap_or(""),
                a.tags.join(";"),
                a.year.map(|y| y.to_string()).unwrap_or_default()
            );
        }
        let path = dir.join("items.csv");
        fs::write(&path, out).map_err(|e| Error::io(&path, e))
    }
}
