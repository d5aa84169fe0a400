use serde::{Deserialize, Serialize};

use super::dense::{dot, norm2};
use super::lanczos::{lanczos_operator, GramOperator};
use super::{DenseMatrix, LinalgError};

/// Below this size in both dimensions the dense Jacobi SVD is used.
pub const DENSE_SVD_LIMIT: usize = 128;

/// Rank-K factors `A ≈ U·diag(σ)·Vᵀ` with `σ` descending and nonnegative.
///
/// Columns of `u` belonging to a zero singular value are left at zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncatedSvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `B = Σ σᵢ uᵢ vᵢᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = DenseMatrix::zeros(m, n);
        for c in 0..self.rank() {
            let s = self.sigma[c];
            for i in 0..m {
                let coef = s * self.u[(i, c)];
                if coef == 0.0 {
                    continue;
                }
                let row = out.row_mut(i);
                for (j, r) in row.iter_mut().enumerate() {
                    *r += coef * self.v[(j, c)];
                }
            }
        }
        out
    }
}

/// Best rank-`rank` approximation of `a`.
pub fn truncated_svd(a: &DenseMatrix, rank: usize) -> Result<TruncatedSvd, LinalgError> {
    let (m, n) = a.shape();
    if rank == 0 || rank > m.min(n) {
        return Err(LinalgError::InvalidArgument(format!(
            "rank must lie in 1..={}, got {rank}",
            m.min(n)
        )));
    }
    if m < DENSE_SVD_LIMIT && n < DENSE_SVD_LIMIT {
        let full = jacobi_svd(a)?;
        return Ok(TruncatedSvd {
            u: take_columns(&full.u, rank),
            sigma: full.sigma[..rank].to_vec(),
            v: take_columns(&full.v, rank),
        });
    }
    gram_svd(a, rank)
}

fn take_columns(m: &DenseMatrix, k: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), k, |i, j| m[(i, j)])
}

fn gram_svd(a: &DenseMatrix, rank: usize) -> Result<TruncatedSvd, LinalgError> {
    let (m, n) = a.shape();
    let outer = m < n;
    let basis = if outer {
        lanczos_operator(&GramOperator::outer(a), rank, 1e-10, m.min(4 * rank + 200))?
    } else {
        lanczos_operator(&GramOperator::inner(a), rank, 1e-10, n.min(4 * rank + 200))?
    };
    let sigma: Vec<f64> = basis.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let cutoff = sigma.first().copied().unwrap_or(0.0) * 1e-13;
    let mut other = DenseMatrix::zeros(if outer { n } else { m }, rank);
    for (c, &s) in sigma.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let x = basis.vectors.column(c);
        let y = if outer { a.t_matvec(&x) } else { a.matvec(&x) };
        other.set_column(c, &y.iter().map(|v| v / s).collect::<Vec<_>>());
    }
    let (u, v) = if outer {
        (basis.vectors, other)
    } else {
        (other, basis.vectors)
    };
    Ok(TruncatedSvd { u, sigma, v })
}

/// Full thin SVD via one-sided (Hestenes) Jacobi rotations.
pub fn jacobi_svd(a: &DenseMatrix) -> Result<TruncatedSvd, LinalgError> {
    let (m, n) = a.shape();
    if m < n {
        let t = jacobi_svd(&a.transpose())?;
        return Ok(TruncatedSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    // columns of A and of V stored contiguously
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let eps = 1e-15;
    let mut converged = false;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NotConverged {
            context: "one-sided jacobi svd".into(),
            residuals: Vec::new(),
        });
    }
    let mut sigma: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]).then(x.cmp(&y)));
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let mut u = DenseMatrix::zeros(m, n);
    let mut v = DenseMatrix::zeros(n, n);
    for (out, &j) in order.iter().enumerate() {
        let s = sigma[j];
        if s > smax * 1e-15 && s > 0.0 {
            u.set_column(out, &cols[j].iter().map(|x| x / s).collect::<Vec<_>>());
        }
        v.set_column(out, &vcols[j]);
    }
    sigma = order.iter().map(|&j| sigma[j]).collect();
    Ok(TruncatedSvd { u, sigma, v })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}
