//! Pluggable discovery methods and their registry.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::index::{IndexParams, JoinIndex};
use super::minhash::{estimate_containment, MinHasher};
use super::unionable::{query_unionable, unionability_score};
use super::{rank, DiscoveryResult, QueryDescriptor, INNER_JOIN_COUNT, JOINABLE_LSH, UNIONABLE_MATCH};
use crate::align::SimilarityWeights;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lake::Lake;
use crate::table::{normalize_value, Cell, Table};

/// What a method may consult besides the two tables it scores.
#[derive(Debug, Clone, Copy)]
pub struct DiscoveryContext<'a> {
    pub lake: &'a Lake,
    pub join_index: Option<&'a JoinIndex>,
    pub index_params: IndexParams,
    pub weights: SimilarityWeights,
    pub exec: Exec,
}

impl<'a> DiscoveryContext<'a> {
    pub fn new(lake: &'a Lake) -> Self {
        DiscoveryContext {
            lake,
            join_index: None,
            index_params: IndexParams::default(),
            weights: SimilarityWeights::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiscoverRequest<'a> {
    pub query: &'a Table,
    pub query_column: Option<&'a str>,
    pub k: usize,
    pub threshold: f64,
}

/// A table-to-table scoring function. Implementations must be deterministic.
///
/// The default [`DiscoveryMethod::discover`] scans every lake table except the
/// query; methods backed by an index override it.
pub trait DiscoveryMethod: Send + Sync {
    fn name(&self) -> &str;

    /// Relatedness of `candidate` to `query`, in `[0, 1]`.
    fn score(&self, query: &Table, candidate: &Table, query_column: Option<&str>) -> Result<f64>;

    fn discover(&self, ctx: &DiscoveryContext<'_>, req: &DiscoverRequest<'_>) -> Result<DiscoveryResult> {
        let candidates: Vec<Arc<Table>> = ctx
            .lake
            .tables()
            .filter(|t| t.id() != req.query.id())
            .cloned()
            .collect();
        let scores = ctx
            .exec
            .map(&candidates, |t| self.score(req.query, t, req.query_column));
        let mut scored = Vec::with_capacity(candidates.len());
        for (t, s) in candidates.iter().zip(scores) {
            scored.push((t.id().to_string(), s?.clamp(0.0, 1.0)));
        }
        Ok(DiscoveryResult {
            method: self.name().to_string(),
            query: QueryDescriptor {
                table_id: req.query.id().to_string(),
                column: req.query_column.map(str::to_string),
            },
            results: rank(scored, req.k),
        })
    }
}

fn require_column<'a>(req_column: Option<&'a str>, method: &str) -> Result<&'a str> {
    req_column.ok_or_else(|| Error::InvalidParameter(format!("method `{method}` needs a query column")))
}

/// MinHash LSH containment search through the lake's [`JoinIndex`].
#[derive(Debug, Default)]
pub struct JoinableLsh;

impl DiscoveryMethod for JoinableLsh {
    fn name(&self) -> &str {
        JOINABLE_LSH
    }

    fn score(&self, query: &Table, candidate: &Table, query_column: Option<&str>) -> Result<f64> {
        let column = require_column(query_column, JOINABLE_LSH)?;
        let hasher = MinHasher::new(IndexParams::default().num_perm, IndexParams::default().seed)?;
        let values = query.column_values(column)?;
        let qsig = hasher.signature(values.iter().map(String::as_str));
        let mut best: f64 = 0.0;
        for i in 0..candidate.num_columns() {
            let vals = candidate.column_values_at(i);
            let xsig = hasher.signature(vals.iter().map(String::as_str));
            best = best.max(estimate_containment(&qsig, &xsig)?);
        }
        Ok(best)
    }

    fn discover(&self, ctx: &DiscoveryContext<'_>, req: &DiscoverRequest<'_>) -> Result<DiscoveryResult> {
        let column = require_column(req.query_column, JOINABLE_LSH)?;
        let built;
        let index = match ctx.join_index {
            Some(idx) => idx,
            None => {
                built = JoinIndex::build(ctx.lake, ctx.index_params)?;
                &built
            }
        };
        index.query_joinable(req.query, column, req.k, req.threshold)
    }
}

/// Column-matching unionability.
#[derive(Debug, Default)]
pub struct UnionableMatch;

impl DiscoveryMethod for UnionableMatch {
    fn name(&self) -> &str {
        UNIONABLE_MATCH
    }

    fn score(&self, query: &Table, candidate: &Table, _query_column: Option<&str>) -> Result<f64> {
        Ok(unionability_score(query, candidate, SimilarityWeights::default()))
    }

    fn discover(&self, ctx: &DiscoveryContext<'_>, req: &DiscoverRequest<'_>) -> Result<DiscoveryResult> {
        query_unionable(ctx.lake, req.query, req.k, ctx.weights, ctx.exec)
    }
}

/// Reference plugin: size of the inner join on the best column pair,
/// relative to the query's row count.
#[derive(Debug, Default)]
pub struct InnerJoinCount;

fn value_counts(t: &Table, idx: usize) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for cell in t.column_cells(idx) {
        if let Cell::Value(v) = cell {
            *counts.entry(normalize_value(v)).or_insert(0) += 1;
        }
    }
    counts
}

impl DiscoveryMethod for InnerJoinCount {
    fn name(&self) -> &str {
        INNER_JOIN_COUNT
    }

    fn score(&self, query: &Table, candidate: &Table, query_column: Option<&str>) -> Result<f64> {
        if query.num_rows() == 0 {
            return Ok(0.0);
        }
        let query_cols: Vec<usize> = match query_column {
            Some(c) => vec![query.column_index(c)?],
            None => (0..query.num_columns()).collect(),
        };
        let cand_counts: Vec<_> = (0..candidate.num_columns()).map(|i| value_counts(candidate, i)).collect();
        let mut best = 0usize;
        for qi in query_cols {
            let qc = value_counts(query, qi);
            for xc in &cand_counts {
                let joined: usize = qc
                    .iter()
                    .filter_map(|(v, n)| xc.get(v).map(|m| n * m))
                    .sum();
                best = best.max(joined);
            }
        }
        Ok((best as f64 / query.num_rows() as f64).min(1.0))
    }
}

/// Named discovery methods. Built-ins: `joinable-lsh`, `unionable-match`,
/// `inner-join-count`.
#[derive(Clone)]
pub struct MethodRegistry {
    methods: BTreeMap<String, Arc<dyn DiscoveryMethod>>,
}

impl std::fmt::Debug for MethodRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.methods.keys()).finish()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl MethodRegistry {
    pub fn empty() -> Self {
        MethodRegistry {
            methods: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        for m in [
            Arc::new(JoinableLsh) as Arc<dyn DiscoveryMethod>,
            Arc::new(UnionableMatch),
            Arc::new(InnerJoinCount),
        ] {
            r.register(m).expect("built-in names are distinct");
        }
        r
    }

    pub fn register(&mut self, method: Arc<dyn DiscoveryMethod>) -> Result<()> {
        let name = method.name().to_string();
        if self.methods.contains_key(&name) {
            return Err(Error::DuplicateName {
                kind: "discovery method",
                name,
            });
        }
        self.methods.insert(name, method);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn DiscoveryMethod>> {
        self.methods.get(name).ok_or_else(|| Error::UnknownName {
            kind: "discovery method",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.methods.keys().map(String::as_str)
    }

    pub fn discover_with(
        &self,
        name: &str,
        ctx: &DiscoveryContext<'_>,
        req: &DiscoverRequest<'_>,
    ) -> Result<DiscoveryResult> {
        self.get(name)?.discover(ctx, req)
    }
}

/// Exact containment of the query column's values in the best column of `x`.
pub fn exact_containment(q: &Table, query_column: &str, x: &Table) -> Result<f64> {
    let qv = q.column_values(query_column)?;
    if qv.is_empty() {
        return Err(Error::EmptyQueryColumn);
    }
    let best = (0..x.num_columns())
        .map(|i| {
            let xv = x.column_values_at(i);
            qv.iter().filter(|v| xv.contains(*v)).count()
        })
        .max()
        .unwrap_or(0);
    Ok(best as f64 / qv.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(id: &str, name: &str, vals: &[&str]) -> Table {
        let rows: Vec<Vec<Option<&str>>> = vals.iter().map(|v| vec![Some(*v)]).collect();
        let refs: Vec<&[Option<&str>]> = rows.iter().map(Vec::as_slice).collect();
        Table::from_literals(id, &[name], &refs).unwrap()
    }

    #[test]
    fn exact_containment_cases() {
        let q = col("q", "v", &["a", "b", "c", "d"]);
        assert_eq!(exact_containment(&q, "v", &q).unwrap(), 1.0);
        assert_eq!(exact_containment(&q, "v", &col("x", "v", &["x", "y"])).unwrap(), 0.0);
        assert_eq!(exact_containment(&q, "v", &col("x", "v", &["a", "b", "z"])).unwrap(), 0.5);
        let empty = Table::from_literals("e", &["v"], &[&[None]]).unwrap();
        assert!(matches!(exact_containment(&empty, "v", &q), Err(Error::EmptyQueryColumn)));
    }

    #[test]
    fn exact_containment_is_monotone_in_candidate_values() {
        let q = col("q", "v", &["a", "b", "c", "d", "e"]);
        let mut vals = vec!["z"];
        let mut prev = 0.0;
        for extra in ["a", "y", "c", "e", "b", "d"] {
            vals.push(extra);
            let s = exact_containment(&q, "v", &col("x", "v", &vals)).unwrap();
            assert!(s >= prev);
            prev = s;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn registry_rejects_duplicates_and_unknown_names() {
        let mut r = MethodRegistry::with_builtins();
        assert_eq!(
            r.names().collect::<Vec<_>>(),
            [INNER_JOIN_COUNT, JOINABLE_LSH, UNIONABLE_MATCH]
        );
        assert!(matches!(r.register(Arc::new(InnerJoinCount)), Err(Error::DuplicateName { .. })));
        assert!(matches!(r.get("santos"), Err(Error::UnknownName { .. })));
    }

    #[test]
    fn inner_join_count_scores() {
        let q = col("q", "city", &["Boston", "Toronto", "Paris", "Rome"]);
        let x = Table::from_literals(
            "x",
            &["town", "cases"],
            &[&[Some("boston"), Some("1")], &[Some("Toronto"), Some("2")], &[Some("Toronto"), Some("3")]],
        )
        .unwrap();
        // Boston x1 + Toronto x2 = 3 joined rows over 4 query rows.
        let s = InnerJoinCount.score(&q, &x, Some("city")).unwrap();
        assert!((s - 0.75).abs() < 1e-12);
        let unrelated = col("u", "v", &["a", "b"]);
        assert_eq!(InnerJoinCount.score(&q, &unrelated, None).unwrap(), 0.0);
        // Clamped when the join fans out.
        let fan = col("f", "c", &["Boston", "Boston", "Boston", "Boston", "Boston"]);
        assert_eq!(InnerJoinCount.score(&q, &fan, Some("city")).unwrap(), 1.0);
    }

    #[test]
    fn default_scan_excludes_query_and_sorts() {
        let q = col("q.csv", "v", &["a", "b", "c", "d"]);
        let lake = Lake::from_tables(
            "/lake",
            vec![
                q.clone(),
                col("half.csv", "v", &["a", "b"]),
                col("none.csv", "v", &["z"]),
                col("all.csv", "v", &["a", "b", "c", "d", "e"]),
            ],
        )
        .unwrap();
        let ctx = DiscoveryContext::new(&lake);
        let req = DiscoverRequest {
            query: &q,
            query_column: Some("v"),
            k: 10,
            threshold: 0.5,
        };
        let res = MethodRegistry::default()
            .discover_with(INNER_JOIN_COUNT, &ctx, &req)
            .unwrap();
        let ids: Vec<_> = res.table_ids().collect();
        assert_eq!(ids, ["all.csv", "half.csv", "none.csv"]);
        assert!(res.results.windows(2).all(|w| w[0].score >= w[1].score));
    }
}
