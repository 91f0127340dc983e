use std::collections::BTreeSet;
use std::sync::Arc;

use super::DiscoveryResult;
use crate::error::{Error, Result};
use crate::lake::Lake;
use crate::table::Table;

/// Union the tables found by every method into one integration set.
///
/// The query table comes first, followed by the discovered tables in
/// lexicographic id order. A `selection`, when given, restricts the
/// discovered tables and must only name tables some method returned.
pub fn assemble_integration_set(
    results: &[DiscoveryResult],
    selection: Option<&[String]>,
    query: &Table,
    lake: &Lake,
) -> Result<Vec<Arc<Table>>> {
    let found: BTreeSet<&str> = results
        .iter()
        .flat_map(DiscoveryResult::table_ids)
        .filter(|id| *id != query.id())
        .collect();
    let chosen: BTreeSet<&str> = match selection {
        Some(sel) => {
            for id in sel {
                if id != query.id() && !found.contains(id.as_str()) {
                    return Err(Error::UnknownTable(id.clone()));
                }
            }
            sel.iter()
                .map(String::as_str)
                .filter(|id| *id != query.id())
                .collect()
        }
        None => found,
    };
    let mut set = Vec::with_capacity(chosen.len() + 1);
    set.push(Arc::new(query.clone()));
    for id in chosen {
        set.push(Arc::clone(lake.table(id)?));
    }
    Ok(set)
}
