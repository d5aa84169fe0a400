use rayon::prelude::*;

use super::types::{FeatureMatrix, SparseGraph, WalkMatrix};
use super::GraphError;
use crate::linalg::{nnls_simplex, DenseMatrix, SparseMatrix, NNLS_TOL};

/// NNLS-weighted walk plus per-row fit diagnostics.
#[derive(Debug, Clone)]
pub struct WeightedWalk {
    pub walk: WalkMatrix,
    /// `‖xᵢ − Σⱼ Mᵢⱼ xⱼ‖₂` per row.
    pub residuals: Vec<f64>,
    /// Rows whose neighbors were all zero vectors while the row was not.
    pub degenerate: Vec<usize>,
}

/// Row `i` expresses `xᵢ` as a convex combination of its in-neighbors.
///
/// Rows are solved independently and in parallel; results do not depend on
/// the thread count.
pub fn edge_weights_nnls(g: &SparseGraph, x: &FeatureMatrix) -> Result<WeightedWalk, GraphError> {
    let n = g.n();
    if x.n() != n {
        return Err(GraphError::InvalidArgument(format!(
            "graph has {n} nodes but features have {} rows",
            x.n()
        )));
    }
    if let Some(i) = (0..n).find(|&i| g.in_degree(i) == 0) {
        return Err(GraphError::IsolatedNode(i));
    }
    let rows: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nbrs: Vec<usize> = g.in_neighbors(i).map(|(j, _)| j).collect();
            let stacked = x.data().select_rows(&nbrs);
            nnls_simplex(x.row(i), &stacked, NNLS_TOL).map(|sol| (nbrs, sol))
        })
        .collect::<Result<_, _>>()?;

    let mut trips = Vec::new();
    let mut residuals = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    for (i, (nbrs, sol)) in rows.into_iter().enumerate() {
        residuals.push(sol.residual);
        if sol.degenerate {
            degenerate.push(i);
        }
        for (j, w) in nbrs.into_iter().zip(sol.weights) {
            if w > 0.0 {
                trips.push((i, j, w));
            }
        }
    }
    let m = SparseMatrix::from_triplets(n, n, trips)?;
    Ok(WeightedWalk {
        walk: WalkMatrix::new(m, x.p(), false)?,
        residuals,
        degenerate,
    })
}

/// Replaces the labeled rows by identity rows; unlabeled rows are untouched.
pub fn clamp_labeled_block(w: &WalkMatrix) -> WalkMatrix {
    let p = w.p();
    let m = w.matrix();
    let trips = (0..p)
        .map(|i| (i, i, 1.0))
        .chain(m.triplets().filter(|&(i, _, _)| i >= p));
    let clamped = SparseMatrix::from_triplets(m.rows(), m.cols(), trips)
        .expect("indices come from a valid matrix");
    WalkMatrix::new_unchecked(clamped, p, true)
}

/// `½(I + M)`; a clamped input stays clamped.
pub fn lazy_walk(w: &WalkMatrix) -> WalkMatrix {
    let id = SparseMatrix::identity(w.n());
    let m = w
        .matrix()
        .linear_combination(0.5, &id, 0.5)
        .expect("identity matches walk shape");
    WalkMatrix::new_unchecked(m, w.p(), w.is_clamped())
}

/// Dense copy of the walk, handy for small-scale checks.
pub fn walk_to_dense(w: &WalkMatrix) -> DenseMatrix {
    w.matrix().to_dense()
}
