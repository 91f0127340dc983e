//! Structural checks on integration output, shared by tests and acceptance.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{outer_union, IntegratedTable, WideTuple};
use crate::error::Result;
use crate::table::Table;

/// No row is subsumed by another row.
pub fn is_maximal(out: &IntegratedTable) -> bool {
    out.rows
        .iter()
        .enumerate()
        .all(|(i, r)| out.rows.iter().enumerate().all(|(j, o)| i == j || !o.subsumes(r)))
}

/// Each row's non-null cells are exactly the values of its origin rows, and
/// the origin rows agree with each other.
pub fn is_sound(tables: &[Arc<Table>], out: &IntegratedTable) -> Result<bool> {
    let (_, union) = outer_union(tables, &out.mapping)?;
    let by_origin: BTreeMap<_, &WideTuple> = union
        .iter()
        .map(|w| (w.origin.iter().next().cloned().expect("one origin"), w))
        .collect();
    for row in &out.rows {
        if row.origin.is_empty() {
            return Ok(false);
        }
        for (p, cell) in row.cells.iter().enumerate() {
            let mut seen = false;
            for o in &row.origin {
                let Some(src) = by_origin.get(o) else {
                    return Ok(false);
                };
                if let Some(v) = src.cells[p].as_str() {
                    if cell.as_str() != Some(v) {
                        return Ok(false);
                    }
                    seen = true;
                }
            }
            if seen == cell.is_null() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Every input row is equal to or subsumed by some output row.
pub fn covers_inputs(tables: &[Arc<Table>], out: &IntegratedTable) -> Result<bool> {
    let (_, union) = outer_union(tables, &out.mapping)?;
    Ok(union.iter().all(|input| {
        out.rows.iter().any(|o| {
            input
                .cells
                .iter()
                .zip(&o.cells)
                .all(|(i, c)| i.is_null() || i.as_str() == c.as_str())
        })
    }))
}
