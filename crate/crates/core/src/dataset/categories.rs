use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNCATEGORIZED: &str = "uncategorized";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemAttributes {
    pub category: Option<String>,
    pub tags: Vec<String>,
    pub year: Option<i32>,
}

/// Per-item attribute table. The `has_*` flags record which columns the
/// source provided at all.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemMeta {
    pub items: HashMap<String, ItemAttributes>,
    pub has_category: bool,
    pub has_tags: bool,
    pub has_year: bool,
}

/// Reads `item_id,category,tags,year`; all columns but `item_id` optional,
/// tags separated by `;`.
pub fn load_item_meta(path: &Path) -> Result<ItemMeta> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let item_col =
        col("item_id").ok_or_else(|| Error::Config(format!("{}: missing column `item_id`", path.display())))?;
    let (cat_col, tag_col, year_col) = (col("category"), col("tags"), col("year"));
    let mut meta = ItemMeta {
        has_category: cat_col.is_some(),
        has_tags: tag_col.is_some(),
        has_year: year_col.is_some(),
        ..ItemMeta::default()
    };
    for (n, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.into(),
            line: n + 1,
            message: e.to_string(),
        })?;
        let get = |c: Option<usize>| c.and_then(|c| record.get(c)).map(str::trim).filter(|s| !s.is_empty());
        let Some(item) = get(Some(item_col)) else {
            return Err(Error::Parse {
                path: path.into(),
                line: n + 1,
                message: "empty item_id".into(),
            });
        };
        let year = match get(year_col) {
            Some(y) => Some(y.parse::<i32>().map_err(|_| Error::Parse {
                path: path.into(),
                line: n + 1,
                message: format!("year `{y}` is not an integer"),
            })?),
            None => None,
        };
        meta.items.insert(
            item.to_string(),
            ItemAttributes {
                category: get(cat_col).map(str::to_string),
                tags: get(tag_col)
                    .map(|t| t.split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect())
                    .unwrap_or_default(),
                year,
            },
        );
    }
    Ok(meta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryStrategy {
    SingleCategory,
    TagSets,
    ByYear,
}

/// Item groups used to aggregate interaction vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMap {
    pub labels: Vec<String>,
    /// Item indices of each category, ascending.
    pub members: Vec<Vec<usize>>,
}

impl CategoryMap {
    pub fn new(labels: Vec<String>, members: Vec<Vec<usize>>) -> Result<Self> {
        if labels.len() != members.len() {
            return Err(Error::InvalidArgument("labels and members differ in length".into()));
        }
        if let Some(j) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!("category `{}` is empty", labels[j])));
        }
        Ok(CategoryMap { labels, members })
    }

    pub fn n_categories(&self) -> usize {
        self.members.len()
    }

    /// Every item in its own singleton group.
    pub fn identity(n_items: usize) -> Self {
        CategoryMap {
            labels: (0..n_items).map(|i| format!("item{i}")).collect(),
            members: (0..n_items).map(|i| vec![i]).collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// True if every item appears in exactly one category.
    pub fn is_partition(&self, n_items: usize) -> bool {
        let mut seen = vec![0usize; n_items];
        for group in &self.members {
            for &i in group {
                if i >= n_items {
                    return false;
                }
                seen[i] += 1;
            }
        }
        seen.iter().all(|&c| c == 1)
    }
}

/// Groups the items listed in `item_ids` (matrix order) by the chosen
/// attribute. Items without the attribute land in `uncategorized`, which is
/// always the last category when present.
pub fn build_category_map(item_ids: &[String], meta: &ItemMeta, strategy: CategoryStrategy) -> Result<CategoryMap> {
    let present = match strategy {
        CategoryStrategy::SingleCategory => meta.has_category,
        CategoryStrategy::TagSets => meta.has_tags,
        CategoryStrategy::ByYear => meta.has_year,
    };
    if !present {
        return Err(Error::Config(format!("item metadata lacks the column required by {strategy:?}")));
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut uncategorized = Vec::new();
    for (idx, id) in item_ids.iter().enumerate() {
        let attrs = meta.items.get(id);
        let keys: Vec<String> = match (strategy, attrs) {
            (CategoryStrategy::SingleCategory, Some(a)) => a.category.iter().cloned().collect(),
            (CategoryStrategy::TagSets, Some(a)) => a.tags.clone(),
            (CategoryStrategy::ByYear, Some(a)) => a.year.iter().map(|y| y.to_string()).collect(),
            (_, None) => Vec::new(),
        };
        if keys.is_empty() {
            uncategorized.push(idx);
        }
        for key in keys {
            let members = groups.entry(key).or_default();
            if members.last() != Some(&idx) {
                members.push(idx);
            }
        }
    }
    let (mut labels, mut members): (Vec<String>, Vec<Vec<usize>>) = groups.into_iter().unzip();
    if !uncategorized.is_empty() {
        labels.push(UNCATEGORIZED.to_string());
        members.push(uncategorized);
    }
    CategoryMap::new(labels, members)
}

#[cfg(test)]
mod tests {
    use super::*;

    type Entry<'a> = (&'a str, Option<&'a str>, &'a [&'a str], Option<i32>);

    fn meta(entries: &[Entry]) -> ItemMeta {
        ItemMeta {
            items: entries
                .iter()
                .map(|(id, c, t, y)| {
                    (
                        id.to_string(),
                        ItemAttributes {
                            category: c.map(str::to_string),
                            tags: t.iter().map(|s| s.to_string()).collect(),
                            year: *y,
                        },
                    )
                })
                .collect(),
            has_category: true,
            has_tags: true,
            has_year: true,
        }
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("i{i}")).collect()
    }

    #[test]
    fn by_year_partitions() {
        let m = meta(&[
            ("i0", None, &[], Some(1999)),
            ("i1", None, &[], Some(1999)),
            ("i2", None, &[], Some(2003)),
            ("i3", None, &[], Some(2003)),
        ]);
        let map = build_category_map(&ids(4), &m, CategoryStrategy::ByYear).unwrap();
        assert_eq!(map.n_categories(), 2);
        assert_eq!(map.sizes(), vec![2, 2]);
        assert!(map.is_partition(4));
    }

    #[test]
    fn tags_allow_multiple_membership() {
        let m = meta(&[("i0", None, &["a", "b"], None), ("i1", None, &["b"], None)]);
        let map = build_category_map(&ids(2), &m, CategoryStrategy::TagSets).unwrap();
        assert_eq!(map.labels, vec!["a", "b"]);
        assert_eq!(map.members, vec![vec![0], vec![0, 1]]);
    }

    #[test]
    fn missing_metadata_goes_to_uncategorized() {
        let m = meta(&[("i0", Some("food"), &[], None)]);
        let map = build_category_map(&ids(2), &m, CategoryStrategy::SingleCategory).unwrap();
        assert_eq!(map.labels, vec!["food", UNCATEGORIZED]);
        assert_eq!(map.members, vec![vec![0], vec![1]]);
        assert!(map.is_partition(2));
    }

    #[test]
    fn absent_column_is_an_error() {
        let mut m = meta(&[]);
        m.has_year = false;
        assert!(build_category_map(&ids(1), &m, CategoryStrategy::ByYear).is_err());
    }
}
