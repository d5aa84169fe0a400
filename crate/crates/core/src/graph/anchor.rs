use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::types::{squared_distance, FeatureMatrix, SparseGraph};
use super::GraphError;

/// Indices of the `k` smallest `(distance, index)` pairs, nearest first.
///
/// Uses a partition step, so the cost is linear in the candidate count plus
/// `k log k` for the final ordering.
pub fn nearest_indices(mut cand: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(cand.len());
    if k == 0 {
        return Vec::new();
    }
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// Anchor-restricted kNN graph.
///
/// `m` anchors are drawn uniformly without replacement from the labeled rows.
/// Each node links to its `δ` nearest anchors other than itself (fewer if not
/// enough exist), and every such link is inserted in both directions with
/// weight 1.
pub fn anchor_knn_graph(
    x: &FeatureMatrix,
    delta: usize,
    m: usize,
    seed: u64,
) -> Result<SparseGraph, GraphError> {
    let p = x.p();
    if m == 0 || m > p {
        return Err(GraphError::InvalidArgument(format!(
            "anchor count must satisfy 1 <= m <= p, got m={m}, p={p}"
        )));
    }
    if delta == 0 || delta > m {
        return Err(GraphError::InvalidArgument(format!(
            "neighbor count must satisfy 1 <= delta <= m, got delta={delta}, m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut anchors = rand::seq::index::sample(&mut rng, p, m).into_vec();
    anchors.sort_unstable();
    knn_over(x, delta, &anchors)
}

/// Exact symmetrized kNN graph: every node is a candidate neighbor.
pub fn mutual_knn_graph(x: &FeatureMatrix, delta: usize) -> Result<SparseGraph, GraphError> {
    if delta == 0 {
        return Err(GraphError::InvalidArgument("neighbor count must be at least 1".into()));
    }
    let all: Vec<usize> = (0..x.n()).collect();
    knn_over(x, delta, &all)
}

fn knn_over(x: &FeatureMatrix, delta: usize, anchors: &[usize]) -> Result<SparseGraph, GraphError> {
    let n = x.n();
    let mut pairs = BTreeSet::new();
    for i in 0..n {
        let cand: Vec<(f64, usize)> = anchors
            .iter()
            .filter(|&&a| a != i)
            .map(|&a| (squared_distance(x.row(i), x.row(a)), a))
            .collect();
        for j in nearest_indices(cand, delta) {
            pairs.insert((i, j));
            pairs.insert((j, i));
        }
    }
    SparseGraph::from_edges(n, pairs.into_iter().map(|(s, d)| (s, d, 1.0)), x.labeled_mask())
}
