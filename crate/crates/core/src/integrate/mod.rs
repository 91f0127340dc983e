//! Integration of an aligned table set into one wide table.

pub mod checks;
mod fd;
mod oracle;
mod outer_join;
mod registry;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::align::IntegrationMapping;
use crate::error::{Error, Result};
use crate::table::{Cell, NullKind, Table};

pub use fd::{full_disjunction, subsumption_filter, FdConfig, DEFAULT_ROW_LIMIT};
pub use oracle::{fd_oracle, ORACLE_MAX_SUBSETS};
pub use outer_join::outer_join_integrate;
pub use registry::{
    FullDisjunction, IntegrateOptions, IntegrationOperator, OperatorRegistry, OuterJoin, FD,
    OUTER_JOIN,
};

/// One source row: table id and 0-based row index.
pub type Origin = (String, usize);

/// A tuple over every integration ID, with the source rows it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WideTuple {
    pub cells: Vec<Cell>,
    pub origin: BTreeSet<Origin>,
}

impl WideTuple {
    pub fn non_null_count(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_null()).count()
    }

    /// `self` subsumes `other`: agrees on all of `other`'s non-null cells and
    /// is non-null on strictly more positions.
    pub fn subsumes(&self, other: &WideTuple) -> bool {
        other
            .cells
            .iter()
            .zip(&self.cells)
            .all(|(o, s)| o.is_null() || o == s)
            && self.non_null_count() > other.non_null_count()
    }

    /// Values with null kinds erased.
    pub fn values(&self) -> Vec<Option<&str>> {
        self.cells.iter().map(Cell::as_str).collect()
    }
}

/// Both tuples agree wherever both are non-null, and share at least one such
/// position.
pub(crate) fn join_consistent(a: &[Cell], b: &[Cell]) -> bool {
    let mut shared = false;
    for (x, y) in a.iter().zip(b) {
        if let (Cell::Value(x), Cell::Value(y)) = (x, y) {
            if x != y {
                return false;
            }
            shared = true;
        }
    }
    shared
}

/// Cell-wise combination: a value wins, then `Missing`, then `Produced`.
pub(crate) fn combine_cell(a: &Cell, b: &Cell) -> Cell {
    match (a, b) {
        (Cell::Value(_), _) => a.clone(),
        (_, Cell::Value(_)) => b.clone(),
        (Cell::Missing, _) | (_, Cell::Missing) => Cell::Missing,
        _ => Cell::Produced,
    }
}

pub(crate) fn combine_cells(a: &[Cell], b: &[Cell]) -> Vec<Cell> {
    a.iter().zip(b).map(|(x, y)| combine_cell(x, y)).collect()
}

/// Merge two join-consistent tuples; `None` if they conflict or share no
/// non-null position.
pub fn complement_merge(t1: &WideTuple, t2: &WideTuple) -> Option<WideTuple> {
    if t1.cells.len() != t2.cells.len() || !join_consistent(&t1.cells, &t2.cells) {
        return None;
    }
    Some(WideTuple {
        cells: combine_cells(&t1.cells, &t2.cells),
        origin: t1.origin.union(&t2.origin).cloned().collect(),
    })
}

/// Per table: the ID position of each of its columns.
pub(crate) fn column_positions(tables: &[Arc<Table>], mapping: &IntegrationMapping) -> Result<Vec<Vec<usize>>> {
    tables
        .iter()
        .map(|t| {
            t.columns()
                .iter()
                .map(|c| {
                    mapping.id_of(t.id(), c).ok_or_else(|| {
                        Error::InvalidMapping(format!("column `{}`.`{c}` has no integration id", t.id()))
                    })
                })
                .collect()
        })
        .collect()
}

pub(crate) fn check_distinct_ids(tables: &[Arc<Table>]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for t in tables {
        if !seen.insert(t.id()) {
            return Err(Error::DuplicateName {
                kind: "table",
                name: t.id().to_string(),
            });
        }
    }
    Ok(())
}

/// Every input row as a wide tuple, in input order. Positions a table does
/// not cover hold `Produced`; the mapping is first restricted to `tables`.
pub fn outer_union(tables: &[Arc<Table>], mapping: &IntegrationMapping) -> Result<(IntegrationMapping, Vec<WideTuple>)> {
    check_distinct_ids(tables)?;
    let mapping = mapping.restrict_to(tables)?;
    let positions = column_positions(tables, &mapping)?;
    let mut out = Vec::new();
    for (t, pos) in tables.iter().zip(&positions) {
        for (ri, row) in t.rows().iter().enumerate() {
            let mut cells = vec![Cell::Produced; mapping.len()];
            for (cell, &p) in row.iter().zip(pos) {
                cells[p] = cell.clone();
            }
            out.push(WideTuple {
                cells,
                origin: BTreeSet::from([(t.id().to_string(), ri)]),
            });
        }
    }
    Ok((mapping, out))
}

pub(crate) fn sort_rows(rows: &mut [WideTuple]) {
    rows.sort_by(|a, b| a.cells.cmp(&b.cells).then_with(|| a.origin.cmp(&b.origin)));
}

/// Output of an integration operator.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedTable {
    pub columns: Vec<String>,
    pub rows: Vec<WideTuple>,
    pub mapping: IntegrationMapping,
    pub operator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowLineage {
    pub nulls: Vec<NullKind>,
    pub origins: Vec<Origin>,
}

/// JSON sidecar written next to an integrated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub operator: String,
    pub columns: Vec<String>,
    pub mapping: IntegrationMapping,
    pub rows: Vec<RowLineage>,
}

impl IntegratedTable {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Rows as cell vectors, dropping origins.
    pub fn cell_set(&self) -> BTreeSet<Vec<Cell>> {
        self.rows.iter().map(|r| r.cells.clone()).collect()
    }

    /// Rows as a multiset of cell vectors.
    pub fn cell_multiset(&self) -> BTreeMap<Vec<Cell>, usize> {
        let mut m = BTreeMap::new();
        for r in &self.rows {
            *m.entry(r.cells.clone()).or_insert(0) += 1;
        }
        m
    }

    pub fn to_table(&self, id: &str) -> Table {
        Table::new(id, self.columns.clone(), self.rows.iter().map(|r| r.cells.clone()).collect())
            .expect("integration ids are unique and rows are full width")
    }

    pub fn to_csv_string(&self) -> String {
        self.to_table(&self.operator).to_csv_string()
    }

    pub fn lineage(&self) -> Lineage {
        Lineage {
            operator: self.operator.clone(),
            columns: self.columns.clone(),
            mapping: self.mapping.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| RowLineage {
                    nulls: r.cells.iter().map(Cell::null_kind).collect(),
                    origins: r.origin.iter().cloned().collect(),
                })
                .collect(),
        }
    }

    /// `out.csv` → `out.lineage.json`.
    pub fn lineage_path(csv_path: &Path) -> PathBuf {
        let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("integrated");
        csv_path.with_file_name(format!("{stem}.lineage.json"))
    }

    /// Write the CSV and its lineage sidecar; returns the sidecar path.
    pub fn save(&self, csv_path: impl AsRef<Path>) -> Result<PathBuf> {
        let csv_path = csv_path.as_ref();
        crate::artifact::write_atomic(csv_path, self.to_csv_string())?;
        let side = Self::lineage_path(csv_path);
        crate::artifact::write_json(&side, &self.lineage())?;
        Ok(side)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wt(cells: &[Option<&str>]) -> WideTuple {
        WideTuple {
            cells: cells.iter().map(|c| c.map_or(Cell::Produced, Cell::value)).collect(),
            origin: BTreeSet::new(),
        }
    }

    #[test]
    fn merge_rules() {
        let a = wt(&[Some("1"), None]);
        let b = wt(&[Some("1"), Some("2")]);
        assert_eq!(complement_merge(&b, &b).unwrap().cells, b.cells);
        assert_eq!(complement_merge(&a, &b).unwrap().cells, b.cells);
        assert!(complement_merge(&b, &wt(&[Some("1"), Some("3")])).is_none());
        assert!(complement_merge(&wt(&[Some("1"), None]), &wt(&[None, Some("2")])).is_none());
    }

    #[test]
    fn missing_beats_produced() {
        assert_eq!(combine_cell(&Cell::Produced, &Cell::Missing), Cell::Missing);
        assert_eq!(combine_cell(&Cell::Produced, &Cell::Produced), Cell::Produced);
        assert_eq!(combine_cell(&Cell::Missing, &Cell::value("x")), Cell::value("x"));
    }

    #[test]
    fn outer_union_pads_with_produced() {
        let a = Arc::new(Table::from_literals("a", &["x"], &[&[Some("1")], &[Some("2")]]).unwrap());
        let b = Arc::new(Table::from_literals("b", &["y"], &[&[Some("3")], &[None], &[Some("5")]]).unwrap());
        let m: IntegrationMapping = serde_json::from_str(r#"{"I0": [["a","x"]], "I1": [["b","y"]]}"#).unwrap();
        let (_, rows) = outer_union(&[a, b], &m).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.cells.iter().filter(|c| **c == Cell::Produced).count() == 1));
        assert_eq!(rows[3].cells, vec![Cell::Produced, Cell::Missing]);
    }
}
