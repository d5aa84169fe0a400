//! Graph-based embedding imputation, graph neural networks with learnable
//! eigenvalue perturbations, and spectrum-preserving sparsification.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`linalg`] | Lanczos, truncated SVD, simplex NNLS, norms |
//! | [`graph`] | MST-kNN and anchor-kNN graphs, NNLS edge weights, walk matrices |
//! | [`diffusion`] | Clamped random-walk imputation and its closed form |
//! | [`gnn`] | MLP / GCN / SGC / ChebyNet / APPNP with eigenvalue perturbation |
//! | [`prune`] | Thresholding, Bernoulli and SVD-guided sparsification, conv unfolding |
//! | [`tensor_io`] | Text container for weight tensors and checkpoints |

pub mod diffusion;
pub mod gnn;
pub mod graph;
pub mod linalg;
pub mod prune;
pub mod tensor_io;

pub use linalg::{DenseMatrix, EigBasis, LinalgError, SparseMatrix};
