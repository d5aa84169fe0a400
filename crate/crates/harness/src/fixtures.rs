//! Synthetic datasets for tests and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spectral_impute::graph::SparseGraph;
use spectral_impute::DenseMatrix;

use crate::io::LabeledGraph;

/// Features plus reference embeddings, some of which are treated as known.
#[derive(Debug, Clone)]
pub struct ImputationSet {
    pub tokens: Vec<String>,
    pub features: DenseMatrix,
    /// Reference embeddings; rows with `has_truth[i] == false` are placeholders.
    pub truth: DenseMatrix,
    pub has_truth: Vec<bool>,
    /// Fixed known rows, used when the split does not draw its own.
    pub fixed_known: Option<Vec<usize>>,
    pub classes: Option<Vec<usize>>,
    pub graph: Option<SparseGraph>,
}

impl ImputationSet {
    pub fn n(&self) -> usize {
        self.features.rows()
    }
}

#[derive(Debug, Clone)]
pub enum Dataset {
    Imputation(ImputationSet),
    Classification(LabeledGraph),
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn token_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

/// Two labeled scalars `{0, 1}` and one unlabeled node fed equally by both.
pub fn chain3() -> ImputationSet {
    let col = |v: [f64; 3]| DenseMatrix::from_vec(3, 1, v.to_vec()).expect("3x1");
    let edges = [(0, 2, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 1, 1.0)];
    ImputationSet {
        tokens: token_names(3),
        features: col([0.0, 1.0, 0.5]),
        truth: col([0.0, 1.0, 0.5]),
        has_truth: vec![true; 3],
        fixed_known: Some(vec![0, 1]),
        classes: None,
        graph: Some(SparseGraph::from_edges(3, edges, vec![true, true, false]).expect("valid edges")),
    }
}

/// Two Gaussian clusters in 8 dimensions; embeddings are a smooth random
/// map of the features into 4 dimensions plus a little noise.
pub fn two_cluster_imputation(n: usize, seed: u64) -> ImputationSet {
    let (d, l) = (8, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let features = DenseMatrix::from_fn(n, d, |i, _| {
        let centre = if classes[i] == 0 { -1.5 } else { 1.5 };
        centre + gaussian(&mut rng)
    });
    let w = DenseMatrix::from_fn(d, l, |_, _| gaussian(&mut rng) / (d as f64).sqrt());
    let mut truth = features.matmul(&w).expect("shapes chain").map(f64::tanh);
    truth.as_mut_slice().iter_mut().for_each(|v| *v += 0.05 * gaussian(&mut rng));
    ImputationSet {
        tokens: token_names(n),
        features,
        truth,
        has_truth: vec![true; n],
        fixed_known: None,
        classes: Some(classes),
        graph: None,
    }
}

/// Two equal blocks with edge probabilities `p_in` / `p_out` and features
/// that separate the blocks only weakly.
pub fn two_block_sbm(n: usize, p_in: f64, p_out: f64, seed: u64) -> LabeledGraph {
    let d = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if classes[i] == classes[j] { p_in } else { p_out };
            if rng.random_bool(p) {
                edges.push((i, j, 1.0));
                edges.push((j, i, 1.0));
            }
        }
    }
    let features = DenseMatrix::from_fn(n, d, |i, j| {
        let sign = if classes[i] == 0 { -1.0 } else { 1.0 };
        let signal = if j < d / 2 { 0.3 * sign } else { 0.0 };
        signal + gaussian(&mut rng)
    });
    LabeledGraph {
        features,
        classes,
        class_names: vec!["a".into(), "b".into()],
        graph: SparseGraph::from_edges(n, edges, vec![false; n]).expect("valid edges"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_reproducible() {
        let a = two_cluster_imputation(50, 3);
        let b = two_cluster_imputation(50, 3);
        assert_eq!(a.truth, b.truth);
        let g1 = two_block_sbm(40, 0.3, 0.05, 1);
        let g2 = two_block_sbm(40, 0.3, 0.05, 1);
        assert_eq!(g1.graph, g2.graph);
        assert_eq!(g1.features, g2.features);
    }
}
