//! Seeded generators for random integration sets and planted-containment lakes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::IntegrationMapping;
use crate::discovery::{exact_containment, IndexParams, JoinIndex};
use crate::error::Result;
use crate::lake::Lake;
use crate::table::{Cell, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct FdInstanceParams {
    pub min_tables: usize,
    pub max_tables: usize,
    pub max_rows: usize,
    pub max_ids: usize,
    pub alphabet: usize,
    pub missing_rate: (f64, f64),
    /// Keep IDs covered by more than one table free of nulls.
    pub protect_shared: bool,
}

impl Default for FdInstanceParams {
    fn default() -> Self {
        FdInstanceParams {
            min_tables: 2,
            max_tables: 4,
            max_rows: 6,
            max_ids: 5,
            alphabet: 4,
            missing_rate: (0.2, 0.4),
            protect_shared: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FdInstance {
    pub tables: Vec<Arc<Table>>,
    pub mapping: IntegrationMapping,
}

/// Random tables over IDs `I0..`; columns are named after their ID so the
/// mapping groups columns by name.
pub fn random_fd_instance(seed: u64, p: &FdInstanceParams) -> FdInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_tables = rng.random_range(p.min_tables..=p.max_tables);
    let n_ids = rng.random_range(2..=p.max_ids.max(2));
    let ids: Vec<String> = (0..n_ids).map(|i| format!("I{i}")).collect();
    let schemas: Vec<Vec<usize>> = (0..n_tables)
        .map(|_| {
            let k = rng.random_range(1..=n_ids.min(3));
            let mut cols: Vec<usize> = (0..n_ids).collect();
            cols.shuffle(&mut rng);
            cols.truncate(k);
            cols.sort_unstable();
            cols
        })
        .collect();
    let mut coverage = vec![0usize; n_ids];
    for s in &schemas {
        for &c in s {
            coverage[c] += 1;
        }
    }
    let rate = rng.random_range(p.missing_rate.0..=p.missing_rate.1);
    let tables = schemas
        .iter()
        .enumerate()
        .map(|(ti, cols)| {
            let n_rows = rng.random_range(1..=p.max_rows);
            let rows = (0..n_rows)
                .map(|_| {
                    cols.iter()
                        .map(|&c| {
                            let protected = p.protect_shared && coverage[c] > 1;
                            if !protected && rng.random_bool(rate) {
                                Cell::Missing
                            } else {
                                Cell::value(format!("{}", (b'a' + rng.random_range(0..p.alphabet) as u8) as char))
                            }
                        })
                        .collect()
                })
                .collect();
            let names = cols.iter().map(|&c| ids[c].clone()).collect();
            Arc::new(Table::new(format!("T{ti}"), names, rows).expect("generated table is well formed"))
        })
        .collect::<Vec<_>>();
    let mapping = IntegrationMapping::by_column_name(&tables).expect("names are unique per table");
    FdInstance { tables, mapping }
}

/// A query column and single-column lake tables whose exact containment of
/// the query is known by construction.
#[derive(Debug, Clone)]
pub struct PlantedLake {
    pub query: Table,
    pub tables: Vec<Table>,
    /// Planted containment for every table that overlaps the query.
    pub planted: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedParams {
    pub columns: usize,
    pub query_size: usize,
    pub levels: Vec<f64>,
    /// Tables planted per containment level.
    pub per_level: usize,
    pub min_size: usize,
    pub max_size: usize,
}

impl Default for PlantedParams {
    fn default() -> Self {
        PlantedParams {
            columns: 1000,
            query_size: 100,
            levels: vec![0.2, 0.5, 0.8],
            per_level: 20,
            min_size: 50,
            max_size: 400,
        }
    }
}

pub const QUERY_COLUMN: &str = "key";

pub fn planted_lake(seed: u64, p: &PlantedParams) -> PlantedLake {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qvals: Vec<String> = (0..p.query_size).map(|i| format!("q{seed}x{i}")).collect();
    let column = |id: String, vals: Vec<String>| {
        let rows = vals.into_iter().map(|v| vec![Cell::value(v)]).collect();
        Table::new(id, vec![QUERY_COLUMN.to_string()], rows).expect("single column")
    };
    let query = column("query.csv".into(), qvals.clone());

    let mut plan: Vec<Option<f64>> = p
        .levels
        .iter()
        .flat_map(|&l| std::iter::repeat_n(Some(l), p.per_level))
        .collect();
    plan.resize(p.columns.max(plan.len()), None);
    plan.shuffle(&mut rng);

    let mut planted = BTreeMap::new();
    let mut filler = 0usize;
    let tables = plan
        .into_iter()
        .enumerate()
        .map(|(i, level)| {
            let id = format!("t{i:04}.csv");
            let overlap = level.map_or(0, |l| (l * p.query_size as f64).round() as usize);
            let size = rng.random_range(p.min_size.max(overlap)..=p.max_size.max(overlap));
            let mut picked: Vec<String> = qvals.choose_multiple(&mut rng, overlap).cloned().collect();
            while picked.len() < size {
                picked.push(format!("f{seed}x{filler}"));
                filler += 1;
            }
            picked.shuffle(&mut rng);
            if let Some(l) = level {
                planted.insert(id.clone(), l);
            }
            column(id, picked)
        })
        .collect();
    PlantedLake { query, tables, planted }
}

/// Fraction of tables with exact containment `>= threshold` that the join
/// index returns when asked for every table at that threshold.
pub fn joinable_recall(planted: &PlantedLake, params: IndexParams, threshold: f64) -> Result<f64> {
    let lake = Lake::from_tables("/synthetic", planted.tables.clone())?;
    let index = JoinIndex::build(&lake, params)?;
    let result = index.query_joinable(&planted.query, QUERY_COLUMN, lake.len(), threshold)?;
    let found: BTreeSet<&str> = result.table_ids().collect();
    let mut relevant = 0usize;
    let mut hit = 0usize;
    for t in &planted.tables {
        if exact_containment(&planted.query, QUERY_COLUMN, t)? >= threshold {
            relevant += 1;
            hit += usize::from(found.contains(t.id()));
        }
    }
    Ok(if relevant == 0 { 1.0 } else { hit as f64 / relevant as f64 })
}

/// Two random value sets drawn from a shared pool, for estimator checks.
pub fn random_set_pair(rng: &mut impl Rng, min: usize, max: usize) -> (BTreeSet<String>, BTreeSet<String>) {
    let pool = rng.random_range(max..=max * 3);
    let draw = |rng: &mut dyn rand::RngCore| {
        let n = rng.random_range(min..=max);
        let mut idx: Vec<usize> = (0..pool).collect();
        idx.shuffle(rng);
        idx.truncate(n);
        idx.into_iter().map(|i| format!("v{i}")).collect::<BTreeSet<_>>()
    };
    let a = draw(rng);
    let b = draw(rng);
    (a, b)
}
