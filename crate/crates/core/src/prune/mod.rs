//! Sparsification of weight matrices and convolution kernels that tries to
//! keep the spectrum of the original close.

mod conv;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{matrix_norms, truncated_svd, DenseMatrix, LinalgError};

pub use conv::{channel_prune_l1, conv2d_via_matmul, conv_to_matrix, signal_rearrange, ConvKernel, Signal};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PruneError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    /// Fraction of zero entries in the result.
    pub sparsity: f64,
    /// `‖A − Ã‖₂`.
    pub two_norm_dev: f64,
    /// `‖A − Ã‖_F`.
    pub fro_norm_dev: f64,
    /// Entries (or channels) kept.
    pub kept_count: usize,
    /// Set when the sparsify threshold was zero and every entry below it was dropped.
    pub zero_threshold: bool,
}

/// Pruned matrix with the mask of positions that survived.
#[derive(Debug, Clone, PartialEq)]
pub struct Sparsified {
    pub matrix: DenseMatrix,
    /// Row-major; `true` where the entry was kept (possibly rescaled).
    pub mask: Vec<bool>,
    pub report: PruneReport,
}

pub fn deviation_report(a: &DenseMatrix, approx: &DenseMatrix, kept_count: usize) -> Result<PruneReport, PruneError> {
    let diff = a.sub(approx)?;
    let norms = matrix_norms(&diff);
    let zeros = approx.as_slice().iter().filter(|&&v| v == 0.0).count();
    let total = approx.as_slice().len().max(1);
    Ok(PruneReport {
        sparsity: zeros as f64 / total as f64,
        two_norm_dev: norms.two_norm,
        fro_norm_dev: norms.fro_norm,
        kept_count,
        zero_threshold: false,
    })
}

/// Row-major indices ordered by descending magnitude, ties by index.
fn by_magnitude_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx
}

/// Keeps the `⌈keep_fraction·mn⌉` largest-magnitude entries.
pub fn hard_threshold(a: &DenseMatrix, keep_fraction: f64) -> Result<Sparsified, PruneError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(PruneError::InvalidArgument(format!(
            "keep fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    let total = a.as_slice().len();
    let keep = ((keep_fraction * total as f64) - 1e-9).ceil().max(0.0) as usize;
    let keep = keep.min(total);
    let mut mask = vec![false; total];
    for &i in &by_magnitude_desc(a.as_slice())[..keep] {
        mask[i] = true;
    }
    let data = a
        .as_slice()
        .iter()
        .zip(&mask)
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    let matrix = DenseMatrix::from_vec(a.rows(), a.cols(), data)?;
    let report = deviation_report(a, &matrix, keep)?;
    Ok(Sparsified { matrix, mask, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KeepPolicy {
    /// Same probability for every entry.
    Constant { p: f64 },
    /// `p_ij = min(1, density·mn·|A_ij| / Σ|A|)`, so the expected kept
    /// fraction is about `density` before clipping.
    MagnitudeProportional { density: f64 },
}

/// Keep probabilities per entry, row-major.
pub fn keep_probabilities(a: &DenseMatrix, policy: KeepPolicy) -> Result<Vec<f64>, PruneError> {
    match policy {
        KeepPolicy::Constant { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(PruneError::InvalidArgument(format!("keep probability must lie in (0, 1], got {p}")));
            }
            Ok(vec![p; a.as_slice().len()])
        }
        KeepPolicy::MagnitudeProportional { density } => {
            if !(density > 0.0 && density <= 1.0) {
                return Err(PruneError::InvalidArgument(format!("density must lie in (0, 1], got {density}")));
            }
            let mass: f64 = a.as_slice().iter().map(|v| v.abs()).sum();
            if mass == 0.0 {
                return Ok(vec![1.0; a.as_slice().len()]);
            }
            let scale = density * a.as_slice().len() as f64 / mass;
            Ok(a.as_slice().iter().map(|v| (scale * v.abs()).min(1.0)).collect())
        }
    }
}

/// Draws `Ã_ij = A_ij/p_ij` with probability `p_ij`, else 0, visiting entries
/// row-major from one generator.
pub fn bernoulli_sample(a: &DenseMatrix, probs: &[f64], rng: &mut impl Rng) -> Result<(DenseMatrix, Vec<bool>), PruneError> {
    if probs.len() != a.as_slice().len() {
        return Err(PruneError::InvalidArgument("probability count does not match matrix".into()));
    }
    let mut mask = vec![false; probs.len()];
    let mut data = vec![0.0; probs.len()];
    for (i, (&v, &p)) in a.as_slice().iter().zip(probs).enumerate() {
        if v == 0.0 {
            continue;
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(PruneError::InvalidArgument(format!(
                "entry {i} is nonzero but has keep probability {p}"
            )));
        }
        if p >= 1.0 || rng.random::<f64>() < p {
            mask[i] = true;
            data[i] = v / p;
        }
    }
    Ok((DenseMatrix::from_vec(a.rows(), a.cols(), data)?, mask))
}

/// Unbiased rescaled Bernoulli sparsification.
pub fn bernoulli_sparsify(a: &DenseMatrix, policy: KeepPolicy, seed: u64) -> Result<Sparsified, PruneError> {
    let probs = keep_probabilities(a, policy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (matrix, mask) = bernoulli_sample(a, &probs, &mut rng)?;
    let kept = mask.iter().filter(|&&m| m).count();
    let report = deviation_report(a, &matrix, kept)?;
    Ok(Sparsified { matrix, mask, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsifyParams {
    /// Below-threshold entries with `p < c` are zeroed.
    pub c: f64,
    /// Quantile of `|B|` below which entries are sampled.
    pub q: f64,
    pub svd_rank: usize,
    pub seed: u64,
}

impl SparsifyParams {
    fn validate(&self, a: &DenseMatrix) -> Result<(), PruneError> {
        if !(0.0..=1.0).contains(&self.c) || !(0.0..=1.0).contains(&self.q) {
            return Err(PruneError::InvalidArgument(format!(
                "need c and q in [0, 1], got c={}, q={}",
                self.c, self.q
            )));
        }
        let max_rank = a.rows().min(a.cols());
        if self.svd_rank == 0 || self.svd_rank > max_rank {
            return Err(PruneError::InvalidArgument(format!(
                "svd rank must lie in 1..={max_rank}, got {}",
                self.svd_rank
            )));
        }
        Ok(())
    }
}

/// Sampling guided by a rank-`K` approximation `B` of `A`.
///
/// Entries are ranked by `(|B_ij|, row-major index)`. The lowest `⌊mn·q⌋`
/// are candidates; `t` is `|B|` at that rank. A candidate gets
/// `p = (B_ij/t)²`, is zeroed when `p < c`, and otherwise becomes `A_ij/p`
/// with probability `p`. Every other entry is kept verbatim.
pub fn sparsify_pc(a: &DenseMatrix, params: &SparsifyParams) -> Result<Sparsified, PruneError> {
    params.validate(a)?;
    let b = truncated_svd(a, params.svd_rank)?.reconstruct();
    let mag: Vec<f64> = b.as_slice().iter().map(|v| v.abs()).collect();
    let total = mag.len();
    let cut = ((total as f64 * params.q) as usize).min(total);
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&x, &y| mag[x].total_cmp(&mag[y]).then(x.cmp(&y)));
    let t = mag[order[cut.min(total - 1)]];

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut below = vec![false; total];
    for &i in &order[..cut] {
        below[i] = true;
    }
    let mut data = a.as_slice().to_vec();
    let mut mask = vec![true; total];
    let zero_threshold = cut > 0 && t == 0.0;
    for i in 0..total {
        if !below[i] {
            continue;
        }
        if zero_threshold {
            data[i] = 0.0;
            mask[i] = false;
            continue;
        }
        let p = (mag[i] / t).powi(2);
        if p < params.c {
            data[i] = 0.0;
            mask[i] = false;
        } else if p >= 1.0 || rng.random::<f64>() < p {
            data[i] /= p;
        } else {
            data[i] = 0.0;
            mask[i] = false;
        }
    }
    let matrix = DenseMatrix::from_vec(a.rows(), a.cols(), data)?;
    let kept = mask.iter().filter(|&&m| m).count();
    let mut report = deviation_report(a, &matrix, kept)?;
    report.zero_threshold = zero_threshold;
    Ok(Sparsified { matrix, mask, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keep_all_is_identity() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let s = hard_threshold(&a, 1.0).unwrap();
        assert_eq!(s.matrix, a);
        assert_eq!(s.report.fro_norm_dev, 0.0);
        assert_eq!(s.report.two_norm_dev, 0.0);
    }

    #[test]
    fn diagonal_third() {
        let a = DenseMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let s = hard_threshold(&a, 1.0 / 3.0).unwrap();
        assert_eq!(s.matrix, a);
        assert_eq!(s.report.kept_count, 3);
    }

    #[test]
    fn certain_keep_and_zero_matrix() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let s = bernoulli_sparsify(&a, KeepPolicy::Constant { p: 1.0 }, 3).unwrap();
        assert_eq!(s.matrix, a);
        let z = DenseMatrix::zeros(3, 3);
        let s = bernoulli_sparsify(&z, KeepPolicy::Constant { p: 0.5 }, 3).unwrap();
        assert_eq!(s.matrix, z);
        assert_eq!(s.report.fro_norm_dev, 0.0);
    }

    #[test]
    fn zero_quantile_keeps_everything() {
        let a = DenseMatrix::from_fn(5, 4, |i, j| (i as f64 - 2.0) * (j as f64 + 0.5) + 0.1 * (i * j) as f64);
        let s = sparsify_pc(&a, &SparsifyParams { c: 0.5, q: 0.0, svd_rank: 2, seed: 1 }).unwrap();
        assert_eq!(s.matrix, a);
    }

    #[test]
    fn unit_floor_is_deterministic() {
        let a = DenseMatrix::from_fn(6, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let p = SparsifyParams { c: 1.0, q: 0.6, svd_rank: 2, seed: 1 };
        let s1 = sparsify_pc(&a, &p).unwrap();
        let s2 = sparsify_pc(&a, &SparsifyParams { seed: 99, ..p }).unwrap();
        assert_eq!(s1.matrix, s2.matrix);
    }

    #[test]
    fn zero_probability_rejected() {
        let a = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(bernoulli_sample(&a, &[0.0], &mut rng).is_err());
    }
}
