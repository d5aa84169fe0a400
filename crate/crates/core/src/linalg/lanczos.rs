//! Lanczos iteration with full reorthogonalization for the eigenpairs of
//! largest magnitude of a symmetric operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::{axpy, dot, norm2};
use super::eigen::{magnitude_order, tridiagonal_eigen};
use super::{DenseMatrix, LinalgError, SparseMatrix};

/// Residual tolerance used when callers have no stronger requirement.
pub const DEFAULT_EIG_TOL: f64 = 1e-6;

const START_SEED: u64 = 0x5eed_1a2c_2024;

/// A symmetric linear map applied matrix-free.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymmetricOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

impl SymmetricOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }
}

/// `AᵀA` (or `AAᵀ` when `outer` is set) without forming the product.
pub struct GramOperator<'a> {
    a: &'a DenseMatrix,
    outer: bool,
}

impl<'a> GramOperator<'a> {
    /// `AᵀA`, dimension `cols`.
    pub fn inner(a: &'a DenseMatrix) -> Self {
        Self { a, outer: false }
    }

    /// `AAᵀ`, dimension `rows`.
    pub fn outer(a: &'a DenseMatrix) -> Self {
        Self { a, outer: true }
    }
}

impl SymmetricOperator for GramOperator<'_> {
    fn dim(&self) -> usize {
        if self.outer {
            self.a.rows()
        } else {
            self.a.cols()
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let out = if self.outer {
            self.a.matvec(&self.a.t_matvec(x))
        } else {
            self.a.t_matvec(&self.a.matvec(x))
        };
        y.copy_from_slice(&out);
    }
}

/// Top-`k` eigenpairs ordered by descending `|λ|` (ties: larger signed value first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigBasis {
    /// `n × k`, orthonormal columns.
    pub vectors: DenseMatrix,
    pub values: Vec<f64>,
}

impl EigBasis {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn n(&self) -> usize {
        self.vectors.rows()
    }

    /// `‖VᵀV − I‖_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        let vtv = self
            .vectors
            .t_matmul(&self.vectors)
            .expect("square gram of basis");
        vtv.sub(&DenseMatrix::identity(self.k()))
            .expect("same shape")
            .frobenius_norm()
    }

    /// Dense `Σ λᵢ vᵢ vᵢᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.n();
        let mut out = DenseMatrix::zeros(n, n);
        for (c, &lambda) in self.values.iter().enumerate() {
            let v = self.vectors.column(c);
            for i in 0..n {
                let s = lambda * v[i];
                axpy(s, &v, out.row_mut(i));
            }
        }
        out
    }
}

/// Top-`k` eigenpairs of a symmetric sparse matrix.
///
/// Each returned pair satisfies `‖m·v − λ·v‖₂ ≤ tol·max(1, |λ|)`.
/// `max_iter` bounds the Krylov dimension.
pub fn lanczos_topk(
    m: &SparseMatrix,
    k: usize,
    tol: f64,
    max_iter: usize,
) -> Result<EigBasis, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.rows(), m.cols()));
    }
    let n = m.rows();
    if k == 0 || k >= n {
        return Err(LinalgError::InvalidArgument(format!(
            "k must satisfy 1 <= k < n, got k={k}, n={n}"
        )));
    }
    let asym = m
        .linear_combination(1.0, &m.transpose(), -1.0)?
        .values()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if asym > 1e-10 {
        return Err(LinalgError::NotSymmetric(asym));
    }
    lanczos_operator(m, k, tol, max_iter)
}

/// Lanczos on any [`SymmetricOperator`]; allows `k == dim`.
pub fn lanczos_operator<O: SymmetricOperator + ?Sized>(
    op: &O,
    k: usize,
    tol: f64,
    max_iter: usize,
) -> Result<EigBasis, LinalgError> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(LinalgError::InvalidArgument(format!(
            "k must satisfy 1 <= k <= dim, got k={k}, dim={n}"
        )));
    }
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let max_dim = n.min(max_iter.max(k));
    let check_every = (k / 4).max(2);

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
    let mut scale = 0.0f64;

    let mut q = random_unit(&mut rng, n, &basis).expect("empty basis never spans");
    let mut w = vec![0.0; n];
    loop {
        op.apply(&q, &mut w);
        let a = dot(&q, &w);
        axpy(-a, &q, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(q);
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let b = norm2(&w);
        scale = scale.max(a.abs() + b);
        let dim = basis.len();

        if dim == max_dim {
            return finish(op, &basis, &alpha, &beta, k, tol, true);
        }

        let breakdown = b <= 1e-12 * scale.max(f64::MIN_POSITIVE);
        if dim >= k && (breakdown || dim % check_every == 0) {
            let estimates_ok = ritz_estimates(&alpha, &beta, if breakdown { 0.0 } else { b }, k)?
                .iter()
                .all(|&(theta, est)| est <= 0.1 * tol * theta.abs().max(1.0));
            if estimates_ok {
                if let Ok(found) = finish(op, &basis, &alpha, &beta, k, tol, false) {
                    return Ok(found);
                }
            }
        }

        if breakdown {
            // invariant subspace found: continue in its orthogonal complement
            match random_unit(&mut rng, n, &basis) {
                Some(fresh) => {
                    beta.push(0.0);
                    q = fresh;
                }
                None => return finish(op, &basis, &alpha, &beta, k, tol, true),
            }
        } else {
            beta.push(b);
            q = w.iter().map(|v| v / b).collect();
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _attempt in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        for _ in 0..2 {
            for b in basis {
                let c = dot(b, &v);
                axpy(-c, b, &mut v);
            }
        }
        let nv = norm2(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// `(θ, |β_last · s_last|)` for the top-k Ritz pairs.
fn ritz_estimates(
    alpha: &[f64],
    beta: &[f64],
    next_beta: f64,
    k: usize,
) -> Result<Vec<(f64, f64)>, LinalgError> {
    let eig = tridiagonal_eigen(alpha, &beta[..alpha.len() - 1])?;
    let last = alpha.len() - 1;
    Ok(magnitude_order(&eig.values)
        .into_iter()
        .take(k)
        .map(|c| (eig.values[c], (next_beta * eig.vectors[(last, c)]).abs()))
        .collect())
}

fn finish<O: SymmetricOperator + ?Sized>(
    op: &O,
    basis: &[Vec<f64>],
    alpha: &[f64],
    beta: &[f64],
    k: usize,
    tol: f64,
    exhausted: bool,
) -> Result<EigBasis, LinalgError> {
    let n = op.dim();
    let dim = basis.len();
    let eig = tridiagonal_eigen(alpha, &beta[..dim - 1])?;
    let order = magnitude_order(&eig.values);
    if order.len() < k {
        return Err(LinalgError::NotConverged {
            context: format!("lanczos produced only {} Ritz pairs", order.len()),
            residuals: Vec::new(),
        });
    }
    let mut vectors = DenseMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut av = vec![0.0; n];
    for (out_col, &c) in order.iter().take(k).enumerate() {
        let theta = eig.values[c];
        let mut y = vec![0.0; n];
        for (j, qj) in basis.iter().enumerate() {
            axpy(eig.vectors[(j, c)], qj, &mut y);
        }
        let ny = norm2(&y);
        y.iter_mut().for_each(|v| *v /= ny);
        // deterministic sign: largest-magnitude component positive
        let pivot = y
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v.abs() > bv.abs() { (i, v) } else { (bi, bv) });
        if pivot.1 < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        op.apply(&y, &mut av);
        let res = av
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - theta * b).powi(2))
            .sum::<f64>()
            .sqrt();
        residuals.push(res);
        values.push(theta);
        vectors.set_column(out_col, &y);
    }
    let ok = residuals
        .iter()
        .zip(&values)
        .all(|(r, l)| *r <= tol * l.abs().max(1.0));
    if ok {
        Ok(EigBasis { vectors, values })
    } else {
        Err(LinalgError::NotConverged {
            context: if exhausted {
                format!("lanczos reached its Krylov limit of {dim}")
            } else {
                "lanczos Ritz residuals above tolerance".into()
            },
            residuals,
        })
    }
}
