use serde::{Deserialize, Serialize};

use super::lanczos::{lanczos_operator, GramOperator};
use super::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixNorms {
    /// Largest singular value.
    pub two_norm: f64,
    pub fro_norm: f64,
}

/// Spectral and Frobenius norms.
///
/// The spectral norm is the square root of the dominant eigenvalue of the
/// smaller Gram matrix, found by Krylov (Lanczos) iteration.
pub fn matrix_norms(a: &DenseMatrix) -> MatrixNorms {
    let fro_norm = a.frobenius_norm();
    if fro_norm == 0.0 {
        return MatrixNorms {
            two_norm: 0.0,
            fro_norm,
        };
    }
    let (m, n) = a.shape();
    // normalize so the residual tolerance is relative
    let scaled = a.scale(1.0 / fro_norm);
    let basis = if m < n {
        lanczos_operator(&GramOperator::outer(&scaled), 1, 1e-12, m)
    } else {
        lanczos_operator(&GramOperator::inner(&scaled), 1, 1e-12, n)
    }
    .expect("a full Krylov space always resolves the dominant Gram eigenpair");
    let two_norm = (basis.values[0].max(0.0).sqrt() * fro_norm).min(fro_norm);
    MatrixNorms { two_norm, fro_norm }
}
