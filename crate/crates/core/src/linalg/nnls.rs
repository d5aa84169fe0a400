//! Least squares over the probability simplex:
//! `min ‖t − Σⱼ wⱼ nⱼ‖²` subject to `w ≥ 0`, `Σ w = 1`.
//!
//! Solved by projected gradient descent with Armijo backtracking, followed by
//! an exact equality-constrained solve on the detected support. The polished
//! point replaces the iterate only when it is feasible and no worse.

use serde::{Deserialize, Serialize};

use super::dense::dot;
use super::lu::lu_solve;
use super::{DenseMatrix, LinalgError};

pub const NNLS_MAX_ITER: usize = 10_000;
pub const NNLS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnlsSolution {
    pub weights: Vec<f64>,
    /// `‖t − Nᵀw‖₂`.
    pub residual: f64,
    pub iterations: usize,
    /// Neighbors were all zero while the target was not; weights are uniform.
    pub degenerate: bool,
}

/// Euclidean projection onto `{w ≥ 0, Σ w = 1}` (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Simplex-constrained least squares of `target` onto the rows of `neighbors`.
pub fn nnls_simplex(
    target: &[f64],
    neighbors: &DenseMatrix,
    tol: f64,
) -> Result<NnlsSolution, LinalgError> {
    let delta = neighbors.rows();
    if delta == 0 {
        return Err(LinalgError::InvalidArgument(
            "at least one neighbor is required".into(),
        ));
    }
    if neighbors.cols() != target.len() {
        return Err(LinalgError::ShapeMismatch(format!(
            "target has dimension {}, neighbors have {}",
            target.len(),
            neighbors.cols()
        )));
    }
    if !neighbors.is_finite() || target.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite("nnls input".into()));
    }

    let gram = neighbors.matmul_t(neighbors)?;
    let b = neighbors.matvec(target);
    let tt = dot(target, target);
    let objective = |w: &[f64]| -> f64 {
        let gw = gram.matvec(w);
        (dot(w, &gw) - 2.0 * dot(&b, w) + tt).max(0.0)
    };

    let uniform = vec![1.0 / delta as f64; delta];
    if gram.max_abs() == 0.0 {
        return Ok(NnlsSolution {
            residual: tt.sqrt(),
            weights: uniform,
            iterations: 0,
            degenerate: tt > 0.0,
        });
    }
    if delta == 1 {
        return Ok(NnlsSolution {
            residual: objective(&uniform).sqrt(),
            weights: uniform,
            iterations: 0,
            degenerate: false,
        });
    }

    // Lipschitz constant of ∇f is 2·λmax(G) ≤ 2·trace(G)
    let trace: f64 = (0..delta).map(|i| gram[(i, i)]).sum();
    let mut step = 1.0 / (2.0 * trace);
    let mut w = uniform;
    let mut f = objective(&w);
    let mut iterations = 0;
    while iterations < NNLS_MAX_ITER {
        iterations += 1;
        let gw = gram.matvec(&w);
        let grad: Vec<f64> = gw.iter().zip(&b).map(|(g, bi)| 2.0 * (g - bi)).collect();
        step *= 2.0;
        let (next, f_next) = loop {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
            let cand = project_to_simplex(&trial);
            let diff: Vec<f64> = cand.iter().zip(&w).map(|(c, wi)| c - wi).collect();
            let f_cand = objective(&cand);
            let bound = f + dot(&grad, &diff) + dot(&diff, &diff) / (2.0 * step);
            if f_cand <= bound + 1e-15 * f.max(1.0) || step < 1e-300 {
                break (cand, f_cand);
            }
            step *= 0.5;
        };
        let moved: f64 = next.iter().zip(&w).map(|(a, c)| (a - c).abs()).sum();
        w = next;
        f = f_next;
        if moved <= tol {
            break;
        }
    }

    if let Some((polished, f_pol)) = polish_on_support(&gram, &b, &w, &objective) {
        if f_pol <= f {
            w = polished;
            f = f_pol;
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(NnlsSolution {
        residual: f.sqrt(),
        weights: w,
        iterations,
        degenerate: false,
    })
}

/// Solves the KKT system restricted to the support of `w`.
fn polish_on_support(
    gram: &DenseMatrix,
    b: &[f64],
    w: &[f64],
    objective: &dyn Fn(&[f64]) -> f64,
) -> Option<(Vec<f64>, f64)> {
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 1e-12).collect();
    let s = support.len();
    if s == 0 {
        return None;
    }
    let mut kkt = DenseMatrix::zeros(s + 1, s + 1);
    let mut rhs = DenseMatrix::zeros(s + 1, 1);
    for (a, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            kkt[(a, c)] = 2.0 * gram[(i, j)];
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
        rhs[(a, 0)] = 2.0 * b[i];
    }
    rhs[(s, 0)] = 1.0;
    let sol = lu_solve(&kkt, &rhs).ok()?;
    let mut out = vec![0.0; w.len()];
    for (a, &i) in support.iter().enumerate() {
        let v = sol[(a, 0)];
        if !(v >= -1e-14) {
            return None;
        }
        out[i] = v.max(0.0);
    }
    let f = objective(&out);
    Some((out, f))
}
