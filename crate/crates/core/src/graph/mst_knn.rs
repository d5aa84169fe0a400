use super::types::{squared_distance, FeatureMatrix, SparseGraph, UnionFind};
use super::GraphError;

/// Minimum spanning tree of the complete Euclidean graph (Kruskal).
///
/// Equal-length edges are taken in `(i, j)` lexicographic order with `i < j`.
/// Returns undirected pairs `(i, j)`, `i < j`, in the order they were accepted.
pub fn kruskal_mst(x: &FeatureMatrix) -> Vec<(usize, usize)> {
    let n = x.n();
    let mut edges: Vec<(f64, u32, u32)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((squared_distance(x.row(i), x.row(j)), i as u32, j as u32));
        }
    }
    edges.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut uf = UnionFind::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (_, i, j) in edges {
        let (i, j) = (i as usize, j as usize);
        if uf.union(i, j) {
            tree.push((i, j));
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    tree
}

/// MST edges in both directions, then nearest in-neighbors until every
/// node's in-degree reaches `min(δ, n − 1)`.
pub fn mst_knn_graph(x: &FeatureMatrix, delta: usize) -> Result<SparseGraph, GraphError> {
    let n = x.n();
    if n < 2 {
        return Err(GraphError::InvalidArgument(format!("need at least two samples, got {n}")));
    }
    if delta == 0 {
        return Err(GraphError::InvalidArgument("minimum degree must be at least 1".into()));
    }
    let target = delta.min(n - 1);
    let mut in_sets: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in kruskal_mst(x) {
        in_sets[j].push(i);
        in_sets[i].push(j);
    }
    for (i, ins) in in_sets.iter_mut().enumerate() {
        if ins.len() >= target {
            continue;
        }
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i && !ins.contains(&j))
            .map(|j| (squared_distance(x.row(i), x.row(j)), j))
            .collect();
        let need = target - ins.len();
        if need < cand.len() {
            cand.select_nth_unstable_by(need - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(need);
        }
        cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ins.extend(cand.into_iter().map(|(_, j)| j));
    }
    let edges = in_sets
        .iter()
        .enumerate()
        .flat_map(|(dst, ins)| ins.iter().map(move |&src| (src, dst, 1.0)));
    SparseGraph::from_edges(n, edges, x.labeled_mask())
}
