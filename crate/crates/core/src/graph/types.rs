use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::linalg::{DenseMatrix, SparseMatrix};

/// Sample features ordered labeled-first: rows `0..p` carry known targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    data: DenseMatrix,
    labeled: usize,
}

impl FeatureMatrix {
    pub fn new(data: DenseMatrix, labeled: usize) -> Result<Self, GraphError> {
        let n = data.rows();
        if labeled == 0 || labeled > n {
            return Err(GraphError::InvalidArgument(format!(
                "labeled count must satisfy 1 <= p <= n, got p={labeled}, n={n}"
            )));
        }
        if !data.is_finite() {
            return Err(GraphError::InvalidArgument("features contain non-finite values".into()));
        }
        Ok(Self { data, labeled })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.data.rows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.data.cols()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.labeled
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn labeled_mask(&self) -> Vec<bool> {
        (0..self.n()).map(|i| i < self.labeled).collect()
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Directed weighted graph.
///
/// Stored as an inbound adjacency: entry `(dst, src)` holds the weight of the
/// edge `src → dst`, so row `i` lists the in-neighbors that node `i`
/// aggregates from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseGraph {
    inbound: SparseMatrix,
    labeled: Vec<bool>,
}

impl SparseGraph {
    /// Builds from `(src, dst, weight)` edges; parallel edges are summed.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        labeled: Vec<bool>,
    ) -> Result<Self, GraphError> {
        if labeled.len() != n {
            return Err(GraphError::InvalidArgument(format!(
                "labeled mask has {} entries for {n} nodes",
                labeled.len()
            )));
        }
        let mut trips = Vec::new();
        for (src, dst, w) in edges {
            if !(w >= 0.0) {
                return Err(GraphError::InvalidArgument(format!(
                    "edge {src} -> {dst} has negative or non-finite weight {w}"
                )));
            }
            trips.push((dst, src, w));
        }
        let inbound = SparseMatrix::from_triplets(n, n, trips)?;
        Ok(Self { inbound, labeled })
    }

    /// Wraps an inbound adjacency matrix directly.
    pub fn from_inbound(inbound: SparseMatrix, labeled: Vec<bool>) -> Result<Self, GraphError> {
        if !inbound.is_square() || labeled.len() != inbound.rows() {
            return Err(GraphError::InvalidArgument("adjacency/mask shape mismatch".into()));
        }
        if inbound.values().iter().any(|&w| !(w >= 0.0)) {
            return Err(GraphError::InvalidArgument("negative edge weight".into()));
        }
        Ok(Self { inbound, labeled })
    }

    pub fn n(&self) -> usize {
        self.inbound.rows()
    }

    pub fn edge_count(&self) -> usize {
        self.inbound.nnz()
    }

    /// Inbound adjacency (`A[dst][src]`).
    pub fn adjacency(&self) -> &SparseMatrix {
        &self.inbound
    }

    pub fn labeled_mask(&self) -> &[bool] {
        &self.labeled
    }

    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.inbound.row(i)
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.inbound.row_nnz(i)
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.inbound.row(dst).any(|(s, _)| s == src)
    }

    /// `(src, dst, weight)` sorted by source then destination.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inbound.transpose().triplets().collect()
    }

    /// Weakly connected component id per node, ids assigned in order of
    /// first appearance.
    pub fn weak_components(&self) -> Vec<usize> {
        let n = self.n();
        let mut uf = UnionFind::new(n);
        for (dst, src, _) in self.inbound.triplets() {
            uf.union(dst, src);
        }
        let mut ids = vec![usize::MAX; n];
        let mut root_id = vec![usize::MAX; n];
        let mut next = 0;
        for i in 0..n {
            let r = uf.find(i);
            if root_id[r] == usize::MAX {
                root_id[r] = next;
                next += 1;
            }
            ids[i] = root_id[r];
        }
        ids
    }

    pub fn is_weakly_connected(&self) -> bool {
        self.weak_components().iter().all(|&c| c == 0)
    }

    /// True when each weakly connected component holds a labeled node.
    pub fn every_component_labeled(&self) -> bool {
        let comp = self.weak_components();
        let count = comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut has = vec![false; count];
        for (i, &c) in comp.iter().enumerate() {
            has[c] |= self.labeled[i];
        }
        has.into_iter().all(|h| h)
    }
}

/// Row-stochastic walk matrix over a labeled-first node order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkMatrix {
    m: SparseMatrix,
    p: usize,
    clamped: bool,
}

pub const STOCHASTIC_TOL: f64 = 1e-9;

impl WalkMatrix {
    /// Validates nonnegativity, unit row sums and, when `clamped`, the
    /// identity labeled block.
    pub fn new(m: SparseMatrix, p: usize, clamped: bool) -> Result<Self, GraphError> {
        if !m.is_square() {
            return Err(GraphError::InvalidArgument("walk matrix must be square".into()));
        }
        if p == 0 || p > m.rows() {
            return Err(GraphError::InvalidArgument(format!(
                "labeled count {p} outside 1..={}",
                m.rows()
            )));
        }
        if m.values().iter().any(|&v| v < 0.0) {
            return Err(GraphError::NotStochastic("negative entry".into()));
        }
        for (i, s) in m.row_sums().into_iter().enumerate() {
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(GraphError::NotStochastic(format!("row {i} sums to {s}")));
            }
        }
        if clamped {
            for i in 0..p {
                let row: Vec<_> = m.row(i).collect();
                if row != [(i, 1.0)] {
                    return Err(GraphError::NotStochastic(format!(
                        "labeled row {i} is not an identity row"
                    )));
                }
            }
        }
        Ok(Self { m, p, clamped })
    }

    pub(crate) fn new_unchecked(m: SparseMatrix, p: usize, clamped: bool) -> Self {
        Self { m, p, clamped }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.n() - self.p
    }

    pub fn is_clamped(&self) -> bool {
        self.clamped
    }

    /// `(M_qp, M_qq)` as dense blocks.
    pub fn unlabeled_blocks(&self) -> (DenseMatrix, DenseMatrix) {
        let (p, q) = (self.p, self.q());
        let mut qp = DenseMatrix::zeros(q, p);
        let mut qq = DenseMatrix::zeros(q, q);
        for r in 0..q {
            for (j, v) in self.m.row(p + r) {
                if j < p {
                    qp[(r, j)] += v;
                } else {
                    qq[(r, j - p)] += v;
                }
            }
        }
        (qp, qq)
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}
