//! Left-deep full outer join baseline.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::{combine_cells, outer_union, sort_rows, IntegratedTable, WideTuple, OUTER_JOIN};
use crate::align::IntegrationMapping;
use crate::error::{Error, Result};
use crate::table::{Cell, Table};

/// Full outer join folded left over `order` (table ids), joining each step on
/// the integration IDs shared by the accumulated result and the next table.
/// Nulls match nothing, and a step with no shared IDs matches no pairs.
/// Subsumed rows are kept. An empty `order` means input order.
pub fn outer_join_integrate(
    tables: &[Arc<Table>],
    mapping: &IntegrationMapping,
    order: &[String],
) -> Result<IntegratedTable> {
    if tables.is_empty() {
        return Err(Error::InvalidParameter("integration set is empty".into()));
    }
    let (mapping, union) = outer_union(tables, mapping)?;
    let order: Vec<&str> = if order.is_empty() {
        tables.iter().map(|t| t.id()).collect()
    } else {
        order.iter().map(String::as_str).collect()
    };
    let given: BTreeSet<&str> = tables.iter().map(|t| t.id()).collect();
    let wanted: BTreeSet<&str> = order.iter().copied().collect();
    if given != wanted || wanted.len() != order.len() {
        return Err(Error::InvalidParameter(
            "join order must list every table of the integration set exactly once".into(),
        ));
    }

    let covered = |id: &str| -> BTreeSet<usize> {
        (0..mapping.len())
            .filter(|&p| mapping.members(p).iter().any(|c| c.table_id == id))
            .collect()
    };
    let rows_of = |id: &str| -> Vec<WideTuple> {
        union
            .iter()
            .filter(|w| w.origin.iter().next().is_some_and(|(t, _)| t == id))
            .cloned()
            .collect()
    };

    let mut acc = rows_of(order[0]);
    let mut acc_cov = covered(order[0]);
    for id in &order[1..] {
        let right = rows_of(id);
        let right_cov = covered(id);
        let shared: Vec<usize> = acc_cov.intersection(&right_cov).copied().collect();
        let matches = |a: &[Cell], b: &[Cell]| {
            !shared.is_empty()
                && shared
                    .iter()
                    .all(|&p| matches!((&a[p], &b[p]), (Cell::Value(x), Cell::Value(y)) if x == y))
        };
        let mut right_hit = vec![false; right.len()];
        let mut next = Vec::new();
        for l in &acc {
            let mut hit = false;
            for (ri, r) in right.iter().enumerate() {
                if matches(&l.cells, &r.cells) {
                    hit = true;
                    right_hit[ri] = true;
                    next.push(WideTuple {
                        cells: combine_cells(&l.cells, &r.cells),
                        origin: l.origin.union(&r.origin).cloned().collect(),
                    });
                }
            }
            if !hit {
                next.push(l.clone());
            }
        }
        next.extend(right.into_iter().zip(right_hit).filter(|(_, h)| !h).map(|(r, _)| r));
        acc = next;
        acc_cov.extend(right_cov);
    }

    sort_rows(&mut acc);
    Ok(IntegratedTable {
        columns: mapping.ids().to_vec(),
        rows: acc,
        mapping,
        operator: OUTER_JOIN.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> (Vec<Arc<Table>>, IntegrationMapping) {
        let a = Arc::new(Table::from_literals("a", &["k", "x"], &[&[Some("1"), Some("p")], &[Some("2"), Some("q")]]).unwrap());
        let b = Arc::new(Table::from_literals("b", &["k", "y"], &[&[Some("1"), Some("r")], &[None, Some("s")]]).unwrap());
        let m = serde_json::from_str(r#"{"I0": [["a","k"],["b","k"]], "I1": [["a","x"]], "I2": [["b","y"]]}"#).unwrap();
        (vec![a, b], m)
    }

    #[test]
    fn joins_and_pads() {
        let (t, m) = set();
        let out = outer_join_integrate(&t, &m, &[]).unwrap();
        let vals: Vec<_> = out.rows.iter().map(WideTuple::values).collect();
        assert_eq!(
            vals,
            vec![
                vec![Some("1"), Some("p"), Some("r")],
                vec![Some("2"), Some("q"), None],
                vec![None, None, Some("s")],
            ]
        );
        assert_eq!(out.rows[1].cells[2], Cell::Produced);
        assert_eq!(out.rows[2].cells[0], Cell::Missing);
    }

    #[test]
    fn single_table_and_bad_order() {
        let (t, m) = set();
        let one = outer_join_integrate(&t[..1], &m, &[]).unwrap();
        assert_eq!(one.num_rows(), 2);
        assert!(outer_join_integrate(&t, &m, &["a".into()]).is_err());
        assert!(outer_join_integrate(&t, &m, &["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn no_shared_ids_is_outer_union() {
        let a = Arc::new(Table::from_literals("a", &["x"], &[&[Some("1")]]).unwrap());
        let b = Arc::new(Table::from_literals("b", &["y"], &[&[Some("1")]]).unwrap());
        let m = serde_json::from_str(r#"{"I0": [["a","x"]], "I1": [["b","y"]]}"#).unwrap();
        assert_eq!(outer_join_integrate(&[a, b], &m, &[]).unwrap().num_rows(), 2);
    }
}
