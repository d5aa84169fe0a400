#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_impute::graph::FeatureMatrix;
use spectral_impute::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dense(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_features(rng: &mut impl Rng, n: usize, d: usize, p: usize) -> FeatureMatrix {
    FeatureMatrix::new(random_dense(rng, n, d), p).unwrap()
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Largest eigenvalue modulus of a general square matrix.
pub fn spectral_radius(m: &DenseMatrix) -> f64 {
    if m.rows() == 0 {
        return 0.0;
    }
    to_na(m)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn l1(m: &DenseMatrix) -> f64 {
    m.as_slice().iter().map(|v| v.abs()).sum()
}

pub struct LsiInstance {
    pub walk: spectral_impute::graph::WalkMatrix,
    pub y_p: DenseMatrix,
}

/// Clamped NNLS walk over an MST-kNN graph plus random known embeddings.
pub fn lsi_instance(seed: u64, n: usize, d: usize, l: usize, p: usize, delta: usize) -> LsiInstance {
    use spectral_impute::graph::{clamp_labeled_block, edge_weights_nnls, mst_knn_graph};
    let mut r = rng(seed);
    let x = random_features(&mut r, n, d, p);
    let g = mst_knn_graph(&x, delta).unwrap();
    let walk = clamp_labeled_block(&edge_weights_nnls(&g, &x).unwrap().walk);
    LsiInstance {
        walk,
        y_p: random_dense(&mut r, p, l),
    }
}

/// Undirected random graph on `n` nodes with a spanning path so it is connected.
pub fn random_graph(rng: &mut impl Rng, n: usize, density: f64) -> spectral_impute::graph::SparseGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i + 1 || rng.random_bool(density) {
                edges.push((i, j, 1.0));
                edges.push((j, i, 1.0));
            }
        }
    }
    spectral_impute::graph::SparseGraph::from_edges(n, edges, vec![true; n]).unwrap()
}
