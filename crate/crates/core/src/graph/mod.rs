//! Sample graph construction and walk matrices.

mod affinity;
mod anchor;
mod mst_knn;
mod types;
mod walk;

use thiserror::Error;

use crate::linalg::LinalgError;

pub use affinity::{pairwise_affinity, random_walk, Affinity, Kernel, INVERSE_DISTANCE_EPS};
pub use anchor::{anchor_knn_graph, mutual_knn_graph, nearest_indices};
pub use mst_knn::{kruskal_mst, mst_knn_graph};
pub use types::{squared_distance, FeatureMatrix, SparseGraph, WalkMatrix, STOCHASTIC_TOL};
pub use walk::{clamp_labeled_block, edge_weights_nnls, lazy_walk, walk_to_dense, WeightedWalk};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node {0} has no in-neighbors")]
    IsolatedNode(usize),

    #[error("not a stochastic walk matrix: {0}")]
    NotStochastic(String),

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
