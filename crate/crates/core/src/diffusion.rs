//! Imputation by iterating a clamped walk matrix, with the closed-form fixed
//! point and a structural convergence check.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::WalkMatrix;
use crate::linalg::{lu_solve, DenseMatrix, LinalgError};

pub const DEFAULT_ETA: f64 = 1e-2;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Largest unlabeled block the dense closed form accepts.
pub const CLOSED_FORM_LIMIT: usize = 2_000;
/// Labeled mass above which an unlabeled row counts as a sink.
pub const SINK_TOL: f64 = 1e-12;
const ZERO_NORM: f64 = 1e-30;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DiffusionError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("walk matrix must have its labeled block clamped")]
    NotClamped,

    #[error("unlabeled block is not convergent; no path to a labeled node from {nodes:?}")]
    NonConvergentBlock { nodes: Vec<usize> },

    #[error("closed form limited to {CLOSED_FORM_LIMIT} unlabeled rows, got {0}; use power iteration")]
    TooLarge(usize),

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `n × L` embeddings; rows `0..p` are known and never modified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    values: DenseMatrix,
    p: usize,
}

impl EmbeddingTable {
    pub fn new(values: DenseMatrix, p: usize) -> Result<Self, DiffusionError> {
        if p > values.rows() {
            return Err(DiffusionError::InvalidArgument(format!(
                "known count {p} exceeds {} rows",
                values.rows()
            )));
        }
        if !values.is_finite() {
            return Err(DiffusionError::InvalidArgument("embeddings contain non-finite values".into()));
        }
        Ok(Self { values, p })
    }

    /// Known rows followed by `q` zero rows.
    pub fn zero_initialized(known: &DenseMatrix, q: usize) -> Self {
        let (p, l) = known.shape();
        let mut values = DenseMatrix::zeros(p + q, l);
        values.as_mut_slice()[..p * l].copy_from_slice(known.as_slice());
        Self { values, p }
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.n() - self.p
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn into_values(self) -> DenseMatrix {
        self.values
    }

    pub fn known(&self) -> DenseMatrix {
        self.values.select_rows(&(0..self.p).collect::<Vec<_>>())
    }

    pub fn imputed(&self) -> DenseMatrix {
        self.values.select_rows(&(self.p..self.n()).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub iterations: usize,
    /// `‖ΔY_q‖₁ / ‖Y_q‖₁` at the last step.
    pub final_change_rate: f64,
    pub converged: bool,
    /// Max-abs gap to the closed form, filled in by callers that compute it.
    pub fixed_point_gap: Option<f64>,
}

fn check_compatible(w: &WalkMatrix, p: usize, n: usize) -> Result<(), DiffusionError> {
    if !w.is_clamped() {
        return Err(DiffusionError::NotClamped);
    }
    if w.p() != p || w.n() != n {
        return Err(DiffusionError::InvalidArgument(format!(
            "walk is {}x{} with p={}, embeddings have n={n}, p={p}",
            w.n(),
            w.n(),
            w.p()
        )));
    }
    Ok(())
}

/// `Y_q ← M_qp·Y_p + M_qq·Y_q` until the L1 change rate drops below `eta`.
pub fn lsi_power_iterate(
    w: &WalkMatrix,
    y0: &EmbeddingTable,
    eta: f64,
    max_iter: usize,
) -> Result<(EmbeddingTable, DiffusionReport), DiffusionError> {
    check_compatible(w, y0.p(), y0.n())?;
    if !(eta > 0.0) {
        return Err(DiffusionError::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let (p, n, l) = (y0.p(), y0.n(), y0.dim());
    let m = w.matrix();
    let mut values = y0.values.clone();
    if p == n {
        let report = DiffusionReport {
            iterations: 0,
            final_change_rate: 0.0,
            converged: true,
            fixed_point_gap: None,
        };
        return Ok((EmbeddingTable { values, p }, report));
    }

    let mut next = vec![0.0; (n - p) * l];
    let mut rate = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let current = values.as_slice();
        next.par_chunks_mut(l).enumerate().for_each(|(r, out)| {
            out.iter_mut().for_each(|v| *v = 0.0);
            for (j, wij) in m.row(p + r) {
                for (o, y) in out.iter_mut().zip(&current[j * l..(j + 1) * l]) {
                    *o += wij * y;
                }
            }
        });
        let tail = &mut values.as_mut_slice()[p * l..];
        let (mut change, mut norm) = (0.0, 0.0);
        for (old, new) in tail.iter().zip(&next) {
            change += (new - old).abs();
            norm += old.abs();
        }
        tail.copy_from_slice(&next);
        if norm < ZERO_NORM {
            rate = if change < ZERO_NORM { 0.0 } else { f64::INFINITY };
        } else {
            rate = change / norm;
        }
        if rate < eta {
            converged = true;
            break;
        }
    }
    let report = DiffusionReport {
        iterations,
        final_change_rate: rate,
        converged,
        fixed_point_gap: None,
    };
    Ok((EmbeddingTable { values, p }, report))
}

/// `Y_q = (I − M_qq)⁻¹ M_qp Y_p` by dense LU.
pub fn closed_form_impute(w: &WalkMatrix, y_p: &DenseMatrix) -> Result<EmbeddingTable, DiffusionError> {
    let p = y_p.rows();
    check_compatible(w, p, w.n())?;
    let q = w.q();
    if q > CLOSED_FORM_LIMIT {
        return Err(DiffusionError::TooLarge(q));
    }
    let (qp, qq) = w.unlabeled_blocks();
    let rhs = qp.matmul(y_p)?;
    let mut system = DenseMatrix::identity(q);
    system.add_scaled(-1.0, &qq);
    let y_q = match lu_solve(&system, &rhs) {
        Ok(y) => y,
        Err(LinalgError::Singular { .. }) => {
            let diag = is_convergent_block(w)?;
            return Err(DiffusionError::NonConvergentBlock { nodes: diag.offending });
        }
        Err(e) => return Err(e.into()),
    };
    let l = y_p.cols();
    let mut values = DenseMatrix::zeros(p + q, l);
    values.as_mut_slice()[..p * l].copy_from_slice(y_p.as_slice());
    values.as_mut_slice()[p * l..].copy_from_slice(y_q.as_slice());
    Ok(EmbeddingTable { values, p })
}

/// `max |Y_q − (M_qp Y_p + M_qq Y_q)|`.
pub fn fixed_point_residual(w: &WalkMatrix, y: &EmbeddingTable) -> Result<f64, DiffusionError> {
    check_compatible(w, y.p(), y.n())?;
    let my = w.matrix().mul_dense(y.values());
    let mut worst: f64 = 0.0;
    for i in y.p()..y.n() {
        for (a, b) in my.row(i).iter().zip(y.values().row(i)) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    pub convergent: bool,
    /// Unlabeled nodes (global indices) that leak mass to the labeled block.
    pub sinks: Vec<usize>,
    /// Unlabeled nodes with no positive path to any sink.
    pub offending: Vec<usize>,
}

/// Every unlabeled node must be a sink or reach one along positive edges.
pub fn is_convergent_block(w: &WalkMatrix) -> Result<ConvergenceDiagnostics, DiffusionError> {
    if !w.is_clamped() {
        return Err(DiffusionError::NotClamped);
    }
    let (p, n) = (w.p(), w.n());
    let q = n - p;
    let m = w.matrix();
    let mut reached = vec![false; q];
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); q];
    let mut queue = VecDeque::new();
    let mut sinks = Vec::new();
    for r in 0..q {
        let mut labeled_mass = 0.0;
        for (j, v) in m.row(p + r) {
            if v <= 0.0 {
                continue;
            }
            if j < p {
                labeled_mass += v;
            } else {
                rev[j - p].push(r);
            }
        }
        if labeled_mass > SINK_TOL {
            reached[r] = true;
            sinks.push(p + r);
            queue.push_back(r);
        }
    }
    while let Some(s) = queue.pop_front() {
        for &u in &rev[s] {
            if !reached[u] {
                reached[u] = true;
                queue.push_back(u);
            }
        }
    }
    let offending: Vec<usize> = (0..q).filter(|&r| !reached[r]).map(|r| p + r).collect();
    Ok(ConvergenceDiagnostics {
        convergent: offending.is_empty(),
        sinks,
        offending,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;

    fn walk(rows: &[Vec<f64>], p: usize) -> WalkMatrix {
        let m = SparseMatrix::from_dense(&DenseMatrix::from_rows(rows).unwrap(), 0.0);
        WalkMatrix::new(m, p, true).unwrap()
    }

    #[test]
    fn midpoint_scalar() {
        let w = walk(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.5, 0.5, 0.0]], 2);
        let y0 = EmbeddingTable::zero_initialized(&DenseMatrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap(), 1);
        let (y, rep) = lsi_power_iterate(&w, &y0, DEFAULT_ETA, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(y.values()[(2, 0)], 0.5);
        assert!(rep.converged);
        let cf = closed_form_impute(&w, &y0.known()).unwrap();
        assert_eq!(cf.values()[(2, 0)], 0.5);
    }

    #[test]
    fn self_loop_block_not_convergent() {
        let w = walk(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1);
        let d = is_convergent_block(&w).unwrap();
        assert!(!d.convergent);
        assert_eq!(d.offending, vec![1]);
        let err = closed_form_impute(&w, &DenseMatrix::from_vec(1, 1, vec![3.0]).unwrap()).unwrap_err();
        assert_eq!(err, DiffusionError::NonConvergentBlock { nodes: vec![1] });
    }

    #[test]
    fn self_affinity_collapses_to_labeled_value() {
        let a = 0.3;
        let w = walk(&[vec![1.0, 0.0], vec![1.0 - a, a]], 1);
        let cf = closed_form_impute(&w, &DenseMatrix::from_vec(1, 2, vec![2.0, -1.0]).unwrap()).unwrap();
        assert!((cf.values()[(1, 0)] - 2.0).abs() < 1e-15);
        assert!((cf.values()[(1, 1)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn unclamped_rejected() {
        let m = SparseMatrix::identity(2);
        let w = WalkMatrix::new(m, 1, false).unwrap();
        assert_eq!(is_convergent_block(&w).unwrap_err(), DiffusionError::NotClamped);
    }
}
