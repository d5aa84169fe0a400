use serde::{Deserialize, Serialize};

use super::types::{squared_distance, FeatureMatrix, WalkMatrix};
use super::GraphError;
use crate::linalg::{DenseMatrix, SparseMatrix};

/// Distance floor for the inverse-Euclidean kernel.
pub const INVERSE_DISTANCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(−‖xᵢ − xⱼ‖² / σ)`; `None` uses the median squared pairwise distance.
    Gaussian { sigma: Option<f64> },
    /// `1 / ‖xᵢ − xⱼ‖`, capped at `1 / ε`.
    InverseEuclidean,
}

#[derive(Debug, Clone)]
pub struct Affinity {
    pub matrix: DenseMatrix,
    /// Bandwidth actually used by the Gaussian kernel.
    pub sigma: Option<f64>,
    /// Unordered pairs whose inverse distance hit the cap.
    pub capped_pairs: usize,
}

/// Dense symmetric affinity with zero diagonal.
pub fn pairwise_affinity(x: &FeatureMatrix, kernel: Kernel) -> Result<Affinity, GraphError> {
    let n = x.n();
    if n < 2 {
        return Err(GraphError::InvalidArgument("affinity needs at least two samples".into()));
    }
    let mut d2 = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = squared_distance(x.row(i), x.row(j));
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    let mut out = DenseMatrix::zeros(n, n);
    let mut capped_pairs = 0;
    let mut used_sigma = None;
    match kernel {
        Kernel::Gaussian { sigma } => {
            let sigma = match sigma {
                Some(s) if s > 0.0 && s.is_finite() => s,
                Some(s) => {
                    return Err(GraphError::InvalidArgument(format!(
                        "gaussian bandwidth must be positive, got {s}"
                    )))
                }
                None => median_squared_distance(&d2),
            };
            used_sigma = Some(sigma);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        out[(i, j)] = (-d2[(i, j)] / sigma).exp();
                    }
                }
            }
        }
        Kernel::InverseEuclidean => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = d2[(i, j)].sqrt();
                    let v = if d < INVERSE_DISTANCE_EPS {
                        capped_pairs += 1;
                        1.0 / INVERSE_DISTANCE_EPS
                    } else {
                        1.0 / d
                    };
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
        }
    }
    Ok(Affinity {
        matrix: out,
        sigma: used_sigma,
        capped_pairs,
    })
}

fn median_squared_distance(d2: &DenseMatrix) -> f64 {
    let n = d2.rows();
    let mut vals: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| d2[(i, j)])
        .collect();
    let mid = vals.len() / 2;
    let (_, m, _) = vals.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

/// Random-walk normalization `M = D⁻¹A` of a nonnegative affinity.
pub fn random_walk(affinity: &DenseMatrix, p: usize) -> Result<WalkMatrix, GraphError> {
    let sparse = SparseMatrix::from_dense(affinity, 0.0);
    let sums = sparse.row_sums();
    if let Some(i) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(GraphError::IsolatedNode(i));
    }
    let trips: Vec<_> = sparse
        .triplets()
        .map(|(i, j, v)| (i, j, v / sums[i]))
        .collect();
    let m = SparseMatrix::from_triplets(sparse.rows(), sparse.cols(), trips)?;
    WalkMatrix::new(m, p, false)
}
