//! Brute-force full disjunction for tiny inputs, used to check the engine.

use std::sync::Arc;

use super::{sort_rows, IntegratedTable, WideTuple, FD};
use crate::align::IntegrationMapping;
use crate::error::{Error, Result};
use crate::table::{Cell, Table};

/// Largest number of row combinations the oracle will enumerate.
pub const ORACLE_MAX_SUBSETS: u128 = 1 << 20;

fn widen(tables: &[Arc<Table>], mapping: &IntegrationMapping) -> Result<Vec<Vec<Vec<Cell>>>> {
    let width = mapping.len();
    let mut out = Vec::new();
    for t in tables {
        let mut pos = Vec::new();
        for c in t.columns() {
            pos.push(
                mapping
                    .id_of(t.id(), c)
                    .ok_or_else(|| Error::InvalidMapping(format!("`{}`.`{c}` unmapped", t.id())))?,
            );
        }
        let rows = t
            .rows()
            .iter()
            .map(|r| {
                let mut w = vec![Cell::Produced; width];
                for (c, &p) in r.iter().zip(&pos) {
                    w[p] = c.clone();
                }
                w
            })
            .collect();
        out.push(rows);
    }
    Ok(out)
}

fn consistent(a: &[Cell], b: &[Cell]) -> bool {
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (Cell::Value(x), Cell::Value(y)) => x == y,
        _ => true,
    })
}

fn connected_pair(a: &[Cell], b: &[Cell]) -> bool {
    a.iter().zip(b).any(|(x, y)| matches!((x, y), (Cell::Value(x), Cell::Value(y)) if x == y))
}

fn is_connected(rows: &[&[Cell]]) -> bool {
    let mut reached = vec![false; rows.len()];
    reached[0] = true;
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        for j in 0..rows.len() {
            if !reached[j] && connected_pair(rows[i], rows[j]) {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    reached.into_iter().all(|r| r)
}

fn fold(rows: &[&[Cell]]) -> Vec<Cell> {
    (0..rows[0].len())
        .map(|p| {
            if let Some(v) = rows.iter().find(|r| !r[p].is_null()) {
                v[p].clone()
            } else if rows.iter().any(|r| r[p] == Cell::Missing) {
                Cell::Missing
            } else {
                Cell::Produced
            }
        })
        .collect()
}

/// Enumerate every choice of at most one row per table, keep the
/// join-consistent connected ones, fold each into a tuple, and keep the
/// maximal tuples.
pub fn fd_oracle(tables: &[Arc<Table>], mapping: &IntegrationMapping) -> Result<IntegratedTable> {
    super::check_distinct_ids(tables)?;
    let mapping = mapping.restrict_to(tables)?;
    let total: u128 = tables.iter().map(|t| t.num_rows() as u128 + 1).product();
    if total > ORACLE_MAX_SUBSETS {
        return Err(Error::OracleTooLarge(total));
    }
    let wide = widen(tables, &mapping)?;

    let mut found: Vec<WideTuple> = Vec::new();
    let mut choice = vec![0usize; tables.len()]; // 0 = none, i = row i-1
    'outer: loop {
        let picked: Vec<(usize, usize)> = choice
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(t, &c)| (t, c - 1))
            .collect();
        if !picked.is_empty() {
            let rows: Vec<&[Cell]> = picked.iter().map(|&(t, r)| wide[t][r].as_slice()).collect();
            let pairwise = (0..rows.len()).all(|i| (i + 1..rows.len()).all(|j| consistent(rows[i], rows[j])));
            if pairwise && is_connected(&rows) {
                found.push(WideTuple {
                    cells: fold(&rows),
                    origin: picked.iter().map(|&(t, r)| (tables[t].id().to_string(), r)).collect(),
                });
            }
        }
        for (t, c) in choice.iter_mut().enumerate() {
            *c += 1;
            if *c <= tables[t].num_rows() {
                continue 'outer;
            }
            *c = 0;
        }
        break;
    }

    // Collapse equal value vectors, then drop non-maximal tuples.
    let mut merged: Vec<WideTuple> = Vec::new();
    for t in found {
        match merged.iter_mut().find(|m| m.values() == t.values()) {
            Some(m) => {
                for (a, b) in m.cells.iter_mut().zip(&t.cells) {
                    if *a == Cell::Produced && *b == Cell::Missing {
                        *a = Cell::Missing;
                    }
                }
                m.origin.extend(t.origin);
            }
            None => merged.push(t),
        }
    }
    let keep: Vec<bool> = merged
        .iter()
        .map(|r| !merged.iter().any(|o| o.subsumes(r)))
        .collect();
    let mut rows: Vec<WideTuple> = merged.into_iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r).collect();
    sort_rows(&mut rows);
    Ok(IntegratedTable {
        columns: mapping.ids().to_vec(),
        rows,
        mapping,
        operator: FD.to_string(),
    })
}
