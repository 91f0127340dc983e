use std::sync::Arc;

use super::{rank, DiscoveryResult, QueryDescriptor, UNIONABLE_MATCH};
use crate::align::{column_similarity, ColumnProfile, SimilarityWeights};
use crate::error::Result;
use crate::exec::Exec;
use crate::lake::Lake;
use crate::table::Table;

/// Maximum-weight bipartite matching (Hungarian method, O(n^2 m)).
///
/// Returns the total weight and, per row, the matched column. Weights are
/// expected to be non-negative, so every row on the smaller side is matched.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let n = weights.len();
    let m = weights.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return (0.0, vec![None; n]);
    }
    if n > m {
        let transposed: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| weights[i][j]).collect()).collect();
        let (total, col_to_row) = max_weight_matching(&transposed);
        let mut row_to_col = vec![None; n];
        for (j, i) in col_to_row.into_iter().enumerate() {
            if let Some(i) = i {
                row_to_col[i] = Some(j);
            }
        }
        return (total, row_to_col);
    }

    // Potentials formulation over costs -w, 1-indexed with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = -weights[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; n];
    let mut total = 0.0;
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = Some(j - 1);
            total += weights[owner[j] - 1][j - 1];
        }
    }
    (total, assignment)
}

fn profiles(t: &Table) -> Vec<ColumnProfile> {
    (0..t.num_columns()).map(|i| ColumnProfile::from_table(t, i)).collect()
}

fn score_profiles(q: &[ColumnProfile], x: &[ColumnProfile], weights: SimilarityWeights) -> f64 {
    if q.is_empty() || x.is_empty() {
        return 0.0;
    }
    let matrix: Vec<Vec<f64>> = q
        .iter()
        .map(|qc| x.iter().map(|xc| column_similarity(qc, xc, weights)).collect())
        .collect();
    let (total, _) = max_weight_matching(&matrix);
    (total / q.len() as f64).clamp(0.0, 1.0)
}

/// Weight of the best one-to-one column matching between `q` and `x`,
/// divided by the number of query columns.
pub fn unionability_score(q: &Table, x: &Table, weights: SimilarityWeights) -> f64 {
    score_profiles(&profiles(q), &profiles(x), weights)
}

/// Linear scan of the lake ranked by [`unionability_score`].
pub fn query_unionable(
    lake: &Lake,
    q: &Table,
    k: usize,
    weights: SimilarityWeights,
    exec: Exec,
) -> Result<DiscoveryResult> {
    let qp = profiles(q);
    let candidates: Vec<Arc<Table>> = lake.tables().filter(|t| t.id() != q.id()).cloned().collect();
    let scores = exec.map(&candidates, |t| score_profiles(&qp, &profiles(t), weights));
    let scored = candidates
        .iter()
        .zip(scores)
        .map(|(t, s)| (t.id().to_string(), s))
        .collect();
    Ok(DiscoveryResult {
        method: UNIONABLE_MATCH.to_string(),
        query: QueryDescriptor {
            table_id: q.id().to_string(),
            column: None,
        },
        results: rank(scored, k),
    })
}
