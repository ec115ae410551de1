use serde::{Deserialize, Serialize};

use crate::dataset::CategoryMap;
use crate::error::{Error, Result};

/// How per-item interactions collapse onto a category feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Sum,
    Mean,
    Disjunction,
}

impl Aggregator {
    pub fn requires_binary_input(self) -> bool {
        matches!(self, Aggregator::Sum | Aggregator::Disjunction)
    }
}

/// Value domain of one aggregated feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureDomain {
    Binary,
    /// Integers `0..=max`.
    Count { max: usize },
    /// Reals in `[0, 1]`.
    Unit,
}

pub fn feature_domains(cmap: &CategoryMap, agg: Aggregator) -> Vec<FeatureDomain> {
    cmap.members
        .iter()
        .map(|m| match agg {
            Aggregator::Disjunction => FeatureDomain::Binary,
            Aggregator::Sum => FeatureDomain::Count { max: m.len() },
            Aggregator::Mean => FeatureDomain::Unit,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedVector {
    pub values: Vec<f64>,
    pub aggregator: Aggregator,
}

pub fn aggregate(x: &[f64], cmap: &CategoryMap, agg: Aggregator) -> Result<AggregatedVector> {
    if agg.requires_binary_input() {
        if let Some(v) = x.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument(format!("{agg:?} aggregation needs binary input, found {v}")));
        }
    }
    let mut values = Vec::with_capacity(cmap.n_categories());
    for members in &cmap.members {
        let mut total = 0.0;
        for &l in members {
            let v = *x.get(l).ok_or(Error::Dimension {
                expected: l + 1,
                got: x.len(),
            })?;
            total += v;
        }
        values.push(match agg {
            Aggregator::Sum => total,
            Aggregator::Mean => total / members.len() as f64,
            Aggregator::Disjunction => f64::from(u8::from(members.iter().any(|&l| x[l] > 0.0))),
        });
    }
    Ok(AggregatedVector { values, aggregator: agg })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_group(items: Vec<usize>) -> CategoryMap {
        CategoryMap::new(vec!["g".into()], vec![items]).unwrap()
    }

    #[test]
    fn the_three_aggregators() {
        let map = one_group(vec![0, 1]);
        assert_eq!(aggregate(&[1.0, 0.0], &map, Aggregator::Sum).unwrap().values, vec![1.0]);
        assert_eq!(aggregate(&[1.0, 0.0], &map, Aggregator::Mean).unwrap().values, vec![0.5]);
        assert_eq!(aggregate(&[0.0, 0.0], &map, Aggregator::Disjunction).unwrap().values, vec![0.0]);
        assert_eq!(aggregate(&[1.0, 1.0], &map, Aggregator::Disjunction).unwrap().values, vec![1.0]);
    }

    #[test]
    fn binary_aggregators_reject_ratings() {
        let map = one_group(vec![0, 1]);
        assert!(aggregate(&[0.4, 0.0], &map, Aggregator::Sum).is_err());
        assert!(aggregate(&[0.4, 0.0], &map, Aggregator::Disjunction).is_err());
        assert_eq!(aggregate(&[0.4, 0.0], &map, Aggregator::Mean).unwrap().values, vec![0.2]);
    }

    #[test]
    fn mean_over_four() {
        let map = one_group(vec![0, 1, 2, 3]);
        assert_eq!(aggregate(&[1.0, 1.0, 0.0, 0.0], &map, Aggregator::Mean).unwrap().values, vec![0.5]);
    }
}
