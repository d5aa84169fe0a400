use serde::{Deserialize, Serialize};

use super::GnnError;
use crate::graph::SparseGraph;
use crate::linalg::{lanczos_topk, EigBasis, SparseMatrix, DEFAULT_EIG_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterKind {
    /// `D̃^{-1/2}(A + I)D̃^{-1/2}`.
    Sna,
    /// `Σ θᵢ Sⁱ` over a base filter.
    Polynomial { theta: Vec<f64> },
    /// Rescaled Laplacian `L̃ = 2L/λmax − I`; the model expands it to `order`.
    Chebyshev { order: usize, lambda_max: f64 },
}

/// Graph filter plus its transpose, which backpropagation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMatrix {
    s: SparseMatrix,
    s_t: SparseMatrix,
    kind: FilterKind,
    symmetric: bool,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl FilterMatrix {
    /// Wraps an arbitrary square filter.
    pub fn new(s: SparseMatrix, kind: FilterKind) -> Result<Self, GnnError> {
        if !s.is_square() {
            return Err(GnnError::InvalidArgument(format!(
                "filter must be square, got {}x{}",
                s.rows(),
                s.cols()
            )));
        }
        if s.values().iter().any(|v| !v.is_finite()) {
            return Err(GnnError::InvalidArgument("filter has non-finite entries".into()));
        }
        let symmetric = s.is_symmetric(SYMMETRY_TOL);
        let s_t = s.transpose();
        Ok(Self { s, s_t, kind, symmetric })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.s
    }

    pub fn transpose(&self) -> &SparseMatrix {
        &self.s_t
    }

    pub fn kind(&self) -> &FilterKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.s.rows()
    }

    /// True when `S = Sᵀ` within `1e-12`.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// `(S + Sᵀ)/2`, or `S` itself when already symmetric.
    pub fn symmetrized(&self) -> SparseMatrix {
        if self.symmetric {
            self.s.clone()
        } else {
            self.s
                .linear_combination(0.5, &self.s_t, 0.5)
                .expect("transpose of a square matrix has the same shape")
        }
    }
}

fn sna_matrix(a: &SparseMatrix) -> SparseMatrix {
    let n = a.rows();
    let with_loops = a
        .linear_combination(1.0, &SparseMatrix::identity(n), 1.0)
        .expect("adjacency is square");
    let inv_sqrt: Vec<f64> = with_loops.row_sums().iter().map(|d| 1.0 / d.sqrt()).collect();
    let trips: Vec<_> = with_loops
        .triplets()
        .map(|(i, j, v)| (i, j, inv_sqrt[i] * v * inv_sqrt[j]))
        .collect();
    SparseMatrix::from_triplets(n, n, trips).expect("indices from a valid matrix")
}

/// Symmetrically normalized adjacency with self-loops. Degrees are the row
/// sums of `A + I`.
pub fn build_filter_sna(g: &SparseGraph) -> Result<FilterMatrix, GnnError> {
    FilterMatrix::new(sna_matrix(g.adjacency()), FilterKind::Sna)
}

/// `Σ θᵢ Sⁱ` with `S` the SNA filter of `g`.
pub fn build_filter_poly(g: &SparseGraph, theta: &[f64]) -> Result<FilterMatrix, GnnError> {
    poly_filter(&sna_matrix(g.adjacency()), theta)
}

/// `Σ θᵢ Bⁱ` for an explicit base matrix.
pub fn poly_filter(base: &SparseMatrix, theta: &[f64]) -> Result<FilterMatrix, GnnError> {
    if theta.is_empty() {
        return Err(GnnError::InvalidArgument("polynomial needs at least one coefficient".into()));
    }
    if !base.is_square() {
        return Err(GnnError::InvalidArgument("base matrix must be square".into()));
    }
    let n = base.rows();
    let mut power = SparseMatrix::identity(n);
    let mut acc = SparseMatrix::zeros(n, n);
    for (i, &t) in theta.iter().enumerate() {
        if i > 0 {
            power = power.mul_sparse(base)?;
        }
        if t != 0.0 {
            acc = acc.linear_combination(1.0, &power, t)?;
        }
    }
    FilterMatrix::new(
        acc,
        FilterKind::Polynomial {
            theta: theta.to_vec(),
        },
    )
}

/// Normalized Laplacian `I − D^{-1/2} A D^{-1/2}` of the symmetrized graph.
/// Nodes without edges get an identity row.
pub fn normalized_laplacian(g: &SparseGraph) -> SparseMatrix {
    let a = g.adjacency();
    let a = a
        .linear_combination(0.5, &a.transpose(), 0.5)
        .expect("adjacency is square");
    let n = a.rows();
    let inv_sqrt: Vec<f64> = a
        .row_sums()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let trips = a
        .triplets()
        .map(|(i, j, v)| (i, j, -inv_sqrt[i] * v * inv_sqrt[j]))
        .chain((0..n).map(|i| (i, i, 1.0)));
    SparseMatrix::from_triplets(n, n, trips).expect("indices from a valid matrix")
}

/// `L̃ = 2L/λmax − I`. `lambda_max = None` computes the top eigenvalue of `L`.
pub fn build_filter_chebyshev(
    g: &SparseGraph,
    order: usize,
    lambda_max: Option<f64>,
) -> Result<FilterMatrix, GnnError> {
    let l = normalized_laplacian(g);
    let n = l.rows();
    let lambda_max = match lambda_max {
        Some(v) if v > 0.0 && v.is_finite() => v,
        Some(v) => return Err(GnnError::InvalidArgument(format!("lambda_max must be positive, got {v}"))),
        None if n == 1 => 1.0,
        None => {
            let top = lanczos_topk(&l, 1, 1e-10, n)?;
            top.values[0].abs().max(f64::MIN_POSITIVE)
        }
    };
    let scaled = l.linear_combination(2.0 / lambda_max, &SparseMatrix::identity(n), -1.0)?;
    FilterMatrix::new(scaled.pruned(0.0), FilterKind::Chebyshev { order, lambda_max })
}

/// `T₀ … T_order` of a rescaled Laplacian.
pub fn chebyshev_basis(l_tilde: &SparseMatrix, order: usize) -> Result<Vec<SparseMatrix>, GnnError> {
    if !l_tilde.is_square() {
        return Err(GnnError::InvalidArgument("rescaled Laplacian must be square".into()));
    }
    let n = l_tilde.rows();
    let mut out = vec![SparseMatrix::identity(n)];
    if order >= 1 {
        out.push(l_tilde.clone());
    }
    for i in 2..=order {
        let next = l_tilde
            .mul_sparse(&out[i - 1])?
            .linear_combination(2.0, &out[i - 2], -1.0)?;
        out.push(next);
    }
    Ok(out)
}

/// Top-`k` eigenpairs of the symmetrized filter, ordered by magnitude.
pub fn perturb_basis(filter: &FilterMatrix, k: usize, tol: Option<f64>) -> Result<EigBasis, GnnError> {
    let n = filter.n();
    if k == 0 || k >= n {
        return Err(GnnError::InvalidArgument(format!("need 1 <= k < n, got k={k}, n={n}")));
    }
    let sym = filter.symmetrized();
    Ok(lanczos_topk(&sym, k, tol.unwrap_or(DEFAULT_EIG_TOL), n)?)
}
