//! Full disjunction by complementation closure and subsumption removal.
//!
//! Starting from the outer union, every tuple in the current frontier is
//! merged with each base row it is join-consistent with, provided the two
//! draw on disjoint source tables. New tuples form the next frontier; the
//! closure ends when a round adds nothing. Any connected, join-consistent set
//! of rows (one per table) is reachable by adding one row at a time, so
//! merging against base rows alone is enough.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::{combine_cell, combine_cells, join_consistent, outer_union, sort_rows, IntegratedTable, WideTuple, FD};
use crate::align::IntegrationMapping;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::table::{Cell, Table};

pub const DEFAULT_ROW_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FdConfig {
    /// Maximum number of distinct intermediate tuples.
    pub row_limit: usize,
    pub exec: Exec,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            row_limit: DEFAULT_ROW_LIMIT,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TableSet(Vec<u64>);

impl TableSet {
    fn single(i: usize, n: usize) -> Self {
        let mut bits = vec![0u64; n.div_ceil(64).max(1)];
        bits[i / 64] |= 1 << (i % 64);
        TableSet(bits)
    }

    fn disjoint(&self, o: &TableSet) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a & b == 0)
    }

    fn union(&self, o: &TableSet) -> TableSet {
        TableSet(self.0.iter().zip(&o.0).map(|(a, b)| a | b).collect())
    }
}

struct Tup {
    cells: Vec<Cell>,
    tables: TableSet,
    origin: BTreeSet<(u32, u32)>,
}

pub fn full_disjunction(tables: &[Arc<Table>], mapping: &IntegrationMapping, cfg: &FdConfig) -> Result<IntegratedTable> {
    let (mapping, union) = outer_union(tables, mapping)?;
    let index_of: HashMap<&str, u32> = tables.iter().enumerate().map(|(i, t)| (t.id(), i as u32)).collect();
    let n_tables = tables.len();

    let base: Vec<Tup> = union
        .iter()
        .map(|w| {
            let (tid, row) = w.origin.iter().next().expect("outer union rows have one origin");
            let ti = index_of[tid.as_str()];
            Tup {
                cells: w.cells.clone(),
                tables: TableSet::single(ti as usize, n_tables),
                origin: BTreeSet::from([(ti, *row as u32)]),
            }
        })
        .collect();

    let mut postings: HashMap<(usize, &str), Vec<usize>> = HashMap::new();
    for (bi, b) in base.iter().enumerate() {
        for (p, c) in b.cells.iter().enumerate() {
            if let Cell::Value(v) = c {
                postings.entry((p, v.as_str())).or_default().push(bi);
            }
        }
    }

    let mut all: Vec<Tup> = Vec::new();
    let mut seen: HashMap<(Vec<Cell>, TableSet), usize> = HashMap::new();
    let mut frontier = Vec::new();
    let insert = |t: Tup, all: &mut Vec<Tup>, seen: &mut HashMap<(Vec<Cell>, TableSet), usize>, frontier: &mut Vec<usize>| -> Result<()> {
        let key = (t.cells.clone(), t.tables.clone());
        if let Some(&i) = seen.get(&key) {
            all[i].origin.extend(t.origin);
            return Ok(());
        }
        if all.len() >= cfg.row_limit {
            return Err(Error::RowLimitExceeded {
                limit: cfg.row_limit,
                count: all.len() + 1,
            });
        }
        seen.insert(key, all.len());
        frontier.push(all.len());
        all.push(t);
        Ok(())
    };
    for b in &base {
        insert(
            Tup {
                cells: b.cells.clone(),
                tables: b.tables.clone(),
                origin: b.origin.clone(),
            },
            &mut all,
            &mut seen,
            &mut frontier,
        )?;
    }

    while !frontier.is_empty() {
        let produced: Vec<Vec<Tup>> = cfg.exec.map(&frontier, |&ti| {
            let t = &all[ti];
            let mut cands: Vec<usize> = t
                .cells
                .iter()
                .enumerate()
                .filter_map(|(p, c)| c.as_str().and_then(|v| postings.get(&(p, v))))
                .flatten()
                .copied()
                .collect();
            cands.sort_unstable();
            cands.dedup();
            cands
                .into_iter()
                .filter_map(|bi| {
                    let b = &base[bi];
                    if !t.tables.disjoint(&b.tables) || !join_consistent(&t.cells, &b.cells) {
                        return None;
                    }
                    Some(Tup {
                        cells: combine_cells(&t.cells, &b.cells),
                        tables: t.tables.union(&b.tables),
                        origin: t.origin.union(&b.origin).copied().collect(),
                    })
                })
                .collect()
        });
        let mut next = Vec::new();
        for t in produced.into_iter().flatten() {
            insert(t, &mut all, &mut seen, &mut next)?;
        }
        frontier = next;
    }

    let rows: Vec<WideTuple> = all
        .into_iter()
        .map(|t| WideTuple {
            cells: t.cells,
            origin: t
                .origin
                .into_iter()
                .map(|(ti, r)| (tables[ti as usize].id().to_string(), r as usize))
                .collect(),
        })
        .collect();
    let rows = subsumption_filter(rows, cfg.exec);
    Ok(IntegratedTable {
        columns: mapping.ids().to_vec(),
        rows,
        mapping,
        operator: FD.to_string(),
    })
}

/// Collapse rows with equal values (origins unioned, `Missing` preferred over
/// `Produced`) and drop every row subsumed by another. Output is sorted.
pub fn subsumption_filter(rows: Vec<WideTuple>, exec: Exec) -> Vec<WideTuple> {
    let mut slot: HashMap<Vec<Option<String>>, usize> = HashMap::new();
    let mut uniq: Vec<WideTuple> = Vec::new();
    for r in rows {
        let key: Vec<Option<String>> = r.cells.iter().map(|c| c.as_str().map(str::to_string)).collect();
        match slot.get(&key) {
            Some(&i) => {
                let u = &mut uniq[i];
                u.cells = u.cells.iter().zip(&r.cells).map(|(a, b)| combine_cell(a, b)).collect();
                u.origin.extend(r.origin);
            }
            None => {
                slot.insert(key, uniq.len());
                uniq.push(r);
            }
        }
    }

    let counts: Vec<usize> = uniq.iter().map(WideTuple::non_null_count).collect();
    let any_non_null = counts.iter().any(|&c| c > 0);
    let mut postings: HashMap<(usize, &str), Vec<usize>> = HashMap::new();
    for (i, r) in uniq.iter().enumerate() {
        for (p, c) in r.cells.iter().enumerate() {
            if let Cell::Value(v) = c {
                postings.entry((p, v.as_str())).or_default().push(i);
            }
        }
    }

    let subsumed = exec.map_range(uniq.len(), |i| {
        let r = &uniq[i];
        if counts[i] == 0 {
            return any_non_null;
        }
        let rarest = r
            .cells
            .iter()
            .enumerate()
            .filter_map(|(p, c)| c.as_str().map(|v| &postings[&(p, v)]))
            .min_by_key(|list| list.len())
            .expect("row has a non-null cell");
        rarest
            .iter()
            .any(|&j| j != i && counts[j] > counts[i] && uniq[j].subsumes(r))
    });

    let mut out: Vec<WideTuple> = uniq
        .into_iter()
        .zip(subsumed)
        .filter_map(|(r, s)| (!s).then_some(r))
        .collect();
    sort_rows(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wt(cells: &[Option<&str>], origin: usize) -> WideTuple {
        WideTuple {
            cells: cells.iter().map(|c| c.map_or(Cell::Produced, Cell::value)).collect(),
            origin: BTreeSet::from([("t".to_string(), origin)]),
        }
    }

    fn values(rows: &[WideTuple]) -> Vec<Vec<Option<&str>>> {
        rows.iter().map(WideTuple::values).collect()
    }

    #[test]
    fn filter_cases() {
        let out = subsumption_filter(vec![wt(&[Some("1"), None], 0), wt(&[Some("1"), Some("2")], 1)], Exec::Sequential);
        assert_eq!(values(&out), vec![vec![Some("1"), Some("2")]]);

        let out = subsumption_filter(vec![wt(&[Some("1"), Some("2")], 0), wt(&[Some("3"), None], 1)], Exec::Sequential);
        assert_eq!(out.len(), 2);

        let out = subsumption_filter(vec![wt(&[Some("1"), Some("2")], 0), wt(&[Some("1"), Some("2")], 1)], Exec::Sequential);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].origin.len(), 2);
    }

    #[test]
    fn all_null_rows() {
        let out = subsumption_filter(vec![wt(&[None, None], 0), wt(&[None, None], 1)], Exec::Sequential);
        assert_eq!(out.len(), 1);
        let out = subsumption_filter(vec![wt(&[None, None], 0), wt(&[Some("1"), None], 1)], Exec::Sequential);
        assert_eq!(values(&out), vec![vec![Some("1"), None]]);
    }

    #[test]
    fn duplicate_collapse_prefers_missing() {
        let mut a = wt(&[Some("1"), None], 0);
        a.cells[1] = Cell::Missing;
        let b = wt(&[Some("1"), None], 1);
        let out = subsumption_filter(vec![b, a], Exec::Sequential);
        assert_eq!(out[0].cells[1], Cell::Missing);
    }

    fn table(id: &str, cols: &[&str], rows: &[&[Option<&str>]]) -> Arc<Table> {
        Arc::new(Table::from_literals(id, cols, rows).unwrap())
    }

    fn by_name(tables: &[Arc<Table>]) -> IntegrationMapping {
        let mut groups: std::collections::BTreeMap<String, Vec<_>> = Default::default();
        for t in tables {
            for c in t.columns() {
                groups.entry(c.clone()).or_default().push(crate::discovery::ColumnRef::new(t.id(), c));
            }
        }
        IntegrationMapping::from_groups(groups.into_iter().collect()).unwrap()
    }

    #[test]
    fn single_table_is_itself() {
        let t = table("a", &["x", "y"], &[&[Some("1"), Some("2")], &[Some("3"), None], &[Some("1"), Some("2")]]);
        let fd = full_disjunction(&[t.clone()], &by_name(&[t]), &FdConfig::default()).unwrap();
        assert_eq!(fd.num_rows(), 2);
        assert_eq!(fd.rows[0].origin.len(), 2);
    }

    #[test]
    fn rows_of_one_table_never_merge() {
        let t = table("a", &["x", "y"], &[&[Some("1"), None], &[Some("1"), Some("2")], &[Some("1"), Some("3")]]);
        let fd = full_disjunction(&[t.clone()], &by_name(&[t]), &FdConfig::default()).unwrap();
        assert_eq!(fd.num_rows(), 2);
    }

    #[test]
    fn chain_connects_transitively() {
        let a = table("a", &["x", "y"], &[&[Some("1"), Some("p")]]);
        let b = table("b", &["y", "z"], &[&[Some("p"), Some("q")]]);
        let c = table("c", &["z", "w"], &[&[Some("q"), Some("r")]]);
        let set = [a, b, c];
        let fd = full_disjunction(&set, &by_name(&set), &FdConfig::default()).unwrap();
        assert_eq!(fd.num_rows(), 1);
        assert_eq!(fd.rows[0].non_null_count(), 4);
    }

    #[test]
    fn row_limit_is_reported() {
        let a = table("a", &["k", "x"], &[&[Some("1"), Some("a")], &[Some("1"), Some("b")], &[Some("1"), Some("c")]]);
        let b = table("b", &["k", "y"], &[&[Some("1"), Some("d")], &[Some("1"), Some("e")], &[Some("1"), Some("f")]]);
        let set = [a, b];
        let cfg = FdConfig {
            row_limit: 8,
            ..FdConfig::default()
        };
        match full_disjunction(&set, &by_name(&set), &cfg) {
            Err(Error::RowLimitExceeded { limit: 8, count }) => assert_eq!(count, 9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let a = table("a", &["k", "x"], &[&[Some("1"), Some("a")], &[Some("2"), None]]);
        let b = table("b", &["k", "y"], &[&[Some("1"), Some("d")], &[None, Some("e")]]);
        let set = [a, b];
        let m = by_name(&set);
        let s = full_disjunction(&set, &m, &FdConfig { exec: Exec::Sequential, ..Default::default() }).unwrap();
        let p = full_disjunction(&set, &m, &FdConfig { exec: Exec::Parallel, ..Default::default() }).unwrap();
        assert_eq!(s, p);
    }
}
