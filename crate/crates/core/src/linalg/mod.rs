//! Dense and sparse numerical kernels: eigensolvers, truncated SVD,
//! simplex-constrained least squares, LU solves and matrix norms.

pub mod dense;
pub mod eigen;
pub mod lanczos;
pub mod lu;
pub mod nnls;
pub mod norms;
pub mod sparse;
pub mod svd;

use thiserror::Error;

pub use dense::DenseMatrix;
pub use eigen::{symmetric_eigen, tridiagonal_eigen, SymmetricEigen};
pub use lanczos::{lanczos_operator, lanczos_topk, EigBasis, GramOperator, SymmetricOperator, DEFAULT_EIG_TOL};
pub use lu::{lu_solve, Lu};
pub use nnls::{nnls_simplex, project_to_simplex, NnlsSolution, NNLS_TOL};
pub use norms::{matrix_norms, MatrixNorms};
pub use sparse::SparseMatrix;
pub use svd::{jacobi_svd, truncated_svd, TruncatedSvd};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("{context} did not converge (residuals {residuals:?})")]
    NotConverged { context: String, residuals: Vec<f64> },

    #[error("matrix is singular (pivot {pivot})")]
    Singular { pivot: usize },
}
