use serde::{Deserialize, Serialize};
use spectral_impute::graph::squared_distance;
use spectral_impute::DenseMatrix;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// `knn_accuracy(k)`, `mse`, `test_accuracy`, `test_loss`, …
    pub kind: String,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub runs: usize,
}

impl EvalResult {
    pub fn single(kind: impl Into<String>, value: f64) -> Self {
        Self {
            kind: kind.into(),
            mean: value,
            std: 0.0,
            runs: 1,
        }
    }

    pub fn aggregate(kind: impl Into<String>, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(HarnessError::InvalidArgument("cannot aggregate zero runs".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            kind: kind.into(),
            mean,
            std,
            runs: values.len(),
        })
    }
}

/// Leave-one-out kNN: each query votes over its `k` nearest rows of
/// `embeddings` other than itself (distance ties by lower index, vote ties
/// by smaller class id).
pub fn knn_classify_eval(embeddings: &DenseMatrix, labels: &[usize], k: usize, queries: &[usize]) -> Result<EvalResult> {
    let n = embeddings.rows();
    if labels.len() != n {
        return Err(HarnessError::InvalidArgument(format!("{} labels for {n} embeddings", labels.len())));
    }
    if k == 0 || k > n.saturating_sub(1) {
        return Err(HarnessError::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            n.saturating_sub(1)
        )));
    }
    if queries.is_empty() {
        return Err(HarnessError::InvalidArgument("query set is empty".into()));
    }
    if let Some(&q) = queries.iter().find(|&&q| q >= n) {
        return Err(HarnessError::InvalidArgument(format!("query {q} out of range")));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let correct = queries
        .iter()
        .filter(|&&q| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != q)
                .map(|j| (squared_distance(embeddings.row(q), embeddings.row(j)), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; classes];
            for &(_, j) in &cand[..k] {
                votes[labels[j]] += 1;
            }
            let best = votes.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).map(|(c, _)| c);
            best == Some(labels[q])
        })
        .count();
    Ok(EvalResult::single(format!("knn_accuracy({k})"), correct as f64 / queries.len() as f64))
}

/// Mean squared difference over every entry.
pub fn mse_eval(imputed: &DenseMatrix, truth: &DenseMatrix) -> Result<EvalResult> {
    if imputed.shape() != truth.shape() {
        return Err(HarnessError::InvalidArgument(format!(
            "imputed is {:?}, truth is {:?}",
            imputed.shape(),
            truth.shape()
        )));
    }
    let count = imputed.as_slice().len();
    if count == 0 {
        return Err(HarnessError::InvalidArgument("nothing to compare".into()));
    }
    let sum: f64 = imputed
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(EvalResult::single("mse", sum / count as f64))
}
