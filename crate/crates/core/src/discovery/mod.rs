//! Top-k joinable and unionable table search over a lake.

mod index;
mod integration_set;
mod methods;
mod minhash;
mod unionable;

use serde::{Deserialize, Serialize};

pub use index::{
    choose_banding, collision_probability, containment_to_jaccard, IndexParams, IndexSidecar,
    JoinIndex, Partition, PartitionInfo, INDEX_FILE, INDEX_SIDECAR,
};
pub use integration_set::assemble_integration_set;
pub use methods::{
    exact_containment, DiscoverRequest, DiscoveryContext, DiscoveryMethod, InnerJoinCount,
    JoinableLsh, MethodRegistry, UnionableMatch,
};
pub use minhash::{
    estimate_containment, minhash_signature, ColumnRef, ColumnSignature, MinHasher, Signature,
    DEFAULT_NUM_PERM, EMPTY_SLOT,
};
pub use unionable::{max_weight_matching, query_unionable, unionability_score};

pub const JOINABLE_LSH: &str = "joinable-lsh";
pub const UNIONABLE_MATCH: &str = "unionable-match";
pub const INNER_JOIN_COUNT: &str = "inner-join-count";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryDescriptor {
    pub table_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTable {
    pub table_id: String,
    pub score: f64,
}

/// Ranked output of one discovery method. Scores are non-increasing and
/// table ids are unique; the query table never appears.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    pub method: String,
    pub query: QueryDescriptor,
    pub results: Vec<ScoredTable>,
}

impl DiscoveryResult {
    pub fn table_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.results.iter().map(|r| r.table_id.as_str())
    }
}

/// Keep each table's best score, sort by score descending with ties broken
/// by table id, and keep the first `k`.
pub(crate) fn rank(scored: Vec<(String, f64)>, k: usize) -> Vec<ScoredTable> {
    let mut best: std::collections::BTreeMap<String, f64> = Default::default();
    for (id, s) in scored {
        let slot = best.entry(id).or_insert(f64::NEG_INFINITY);
        if s > *slot {
            *slot = s;
        }
    }
    let mut scored: Vec<_> = best.into_iter().collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
        .into_iter()
        .take(k)
        .map(|(table_id, score)| ScoredTable { table_id, score })
        .collect()
}
