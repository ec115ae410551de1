use std::collections::HashMap;

use super::{InteractionMatrix, ValueDomain};
use crate::error::{Error, Result};

/// Maps integer ratings `1..=scale_max` onto `v / scale_max`.
pub fn normalize_ratings(m: &InteractionMatrix, scale_max: u32) -> Result<InteractionMatrix> {
    if scale_max == 0 {
        return Err(Error::InvalidArgument("scale_max must be positive".into()));
    }
    let scale = f64::from(scale_max);
    for (u, i, v) in m.triplets() {
        if v.fract() != 0.0 || v < 1.0 || v > scale {
            return Err(Error::Data(format!(
                "rating {v} for user `{}` item `{}` outside 1..={scale_max}",
                m.user_ids()[u],
                m.item_ids()[i]
            )));
        }
    }
    let levels = (1..=scale_max).map(|r| f64::from(r) / scale).collect();
    Ok(m.map_values(ValueDomain::RatingLevels(levels), |v| Some(v / scale)))
}

/// Every non-zero entry becomes 1.
pub fn binarize(m: &InteractionMatrix) -> InteractionMatrix {
    m.map_values(ValueDomain::Binary, |v| (v != 0.0).then_some(1.0))
}

/// Iteratively drops users and items with too few entries until nothing
/// changes, then re-densifies indices.
pub fn prune(m: &InteractionMatrix, min_user_interactions: usize, min_item_interactions: usize) -> Result<InteractionMatrix> {
    let mut user_alive = vec![true; m.n_users()];
    let mut item_alive = vec![true; m.n_items()];
    loop {
        let mut changed = false;
        let mut item_counts = vec![0usize; m.n_items()];
        for (u, alive) in user_alive.iter_mut().enumerate() {
            if !*alive {
                continue;
            }
            let count = m.row(u).iter().filter(|e| item_alive[e.0]).count();
            if count < min_user_interactions {
                *alive = false;
                changed = true;
            }
        }
        for u in (0..m.n_users()).filter(|&u| user_alive[u]) {
            for &(i, _) in m.row(u) {
                if item_alive[i] {
                    item_counts[i] += 1;
                }
            }
        }
        for (i, alive) in item_alive.iter_mut().enumerate() {
            if *alive && item_counts[i] < min_item_interactions {
                *alive = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let users: Vec<usize> = (0..m.n_users()).filter(|&u| user_alive[u]).collect();
    let items: Vec<usize> = (0..m.n_items()).filter(|&i| item_alive[i]).collect();
    let item_map: HashMap<usize, usize> = items.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let triplets: Vec<(usize, usize, f64)> = users
        .iter()
        .enumerate()
        .flat_map(|(nu, &u)| {
            m.row(u)
                .iter()
                .filter_map(|&(i, v)| item_map.get(&i).map(|&ni| (nu, ni, v)))
                .collect::<Vec<_>>()
        })
        .collect();
    if triplets.is_empty() {
        return Err(Error::Data("pruning removed all data".into()));
    }
    InteractionMatrix::from_triplets(
        users.iter().map(|&u| m.user_ids()[u].clone()).collect(),
        items.iter().map(|&i| m.item_ids()[i].clone()).collect(),
        triplets,
        m.value_domain().clone(),
    )
}
