use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{InteractionMatrix, ValueDomain};
use crate::error::{Error, Result};

/// Column mapping for an interaction CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub user: String,
    pub item: String,
    /// Absent means every listed pair is a binary interaction.
    pub value: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            user: "user_id".into(),
            item: "item_id".into(),
            value: Some("rating".into()),
        }
    }
}

pub fn load_interactions(path: &Path, schema: &CsvSchema) -> Result<InteractionMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_interactions(file, schema, path)
}

/// Parses interactions from any reader. `origin` is used only in error
/// messages. Line numbers in errors count data rows, starting at 1 after the
/// header.
pub fn read_interactions<R: Read>(reader: R, schema: &CsvSchema, origin: &Path) -> Result<InteractionMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let origin = PathBuf::from(origin);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{}: cannot read header: {e}", origin.display())))?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column `{name}`", origin.display())))
    };
    let user_col = column(&schema.user)?;
    let item_col = column(&schema.item)?;
    let value_col = schema.value.as_deref().map(column).transpose()?;

    let mut user_ids: Vec<String> = Vec::new();
    let mut item_ids: Vec<String> = Vec::new();
    let mut user_index: HashMap<String, usize> = HashMap::new();
    let mut item_index: HashMap<String, usize> = HashMap::new();
    let mut triplets = Vec::new();

    for (n, record) in rdr.records().enumerate() {
        let line = n + 1;
        let parse_err = |message: String| Error::Parse {
            path: origin.clone(),
            line,
            message,
        };
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let field = |col: usize, what: &str| -> Result<String> {
            match record.get(col).map(str::trim) {
                Some(s) if !s.is_empty() => Ok(s.to_string()),
                _ => Err(parse_err(format!("empty {what} field"))),
            }
        };
        let user = field(user_col, "user")?;
        let item = field(item_col, "item")?;
        let value = match value_col {
            Some(col) => {
                let raw = field(col, "value")?;
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("value `{raw}` is not a number")))?
            }
            None => 1.0,
        };
        let u = *user_index.entry(user.clone()).or_insert_with(|| {
            user_ids.push(user);
            user_ids.len() - 1
        });
        let i = *item_index.entry(item.clone()).or_insert_with(|| {
            item_ids.push(item);
            item_ids.len() - 1
        });
        triplets.push((u, i, value));
    }

    if triplets.is_empty() {
        return Err(Error::Data(format!("{}: no interactions", origin.display())));
    }
    let domain = if value_col.is_some() { ValueDomain::Raw } else { ValueDomain::Binary };
    InteractionMatrix::from_triplets(user_ids, item_ids, triplets, domain)
}
