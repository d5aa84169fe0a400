use serde::{Deserialize, Serialize};

use super::{DenseMatrix, LinalgError};

/// Compressed-row sparse matrix.
///
/// Column indices are strictly increasing within each row, so duplicate
/// coordinates never coexist; [`SparseMatrix::from_triplets`] sums them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            offsets: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Validating constructor from raw compressed-row arrays.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        if offsets.len() != rows + 1 || offsets[0] != 0 || offsets[rows] != indices.len() {
            return Err(LinalgError::ShapeMismatch("bad row offsets".into()));
        }
        if indices.len() != values.len() {
            return Err(LinalgError::ShapeMismatch(
                "indices and values differ in length".into(),
            ));
        }
        for i in 0..rows {
            if offsets[i] > offsets[i + 1] {
                return Err(LinalgError::ShapeMismatch(format!(
                    "row offsets decrease at row {i}"
                )));
            }
            let cols_i = &indices[offsets[i]..offsets[i + 1]];
            if cols_i.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LinalgError::ShapeMismatch(format!(
                    "column indices of row {i} not strictly increasing"
                )));
            }
            if cols_i.last().is_some_and(|&c| c >= cols) {
                return Err(LinalgError::IndexOutOfRange(format!(
                    "column index in row {i} exceeds {cols}"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite("sparse values".into()));
        }
        Ok(Self {
            rows,
            cols,
            offsets,
            indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, LinalgError> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(LinalgError::IndexOutOfRange(format!(
                    "({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite(format!("entry ({r}, {c})")));
            }
            per_row[r].push((c, v));
        }
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for mut entries in per_row {
            entries.sort_by_key(|&(c, _)| c);
            for (c, v) in entries {
                if indices.len() > *offsets.last().unwrap() && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Ok(Self {
            rows,
            cols,
            offsets,
            indices,
            values,
        })
    }

    /// Keeps entries with `|v| > drop_tol`.
    pub fn from_dense(m: &DenseMatrix, drop_tol: f64) -> Self {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v.abs() > drop_tol {
                    indices.push(j);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            offsets,
            indices,
            values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs stored in row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.offsets[i]..self.offsets[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                let slot = next[j];
                indices[slot] = i;
                values[slot] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            offsets,
            indices,
            values,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "sparse matvec dimension mismatch");
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// Sparse × dense product.
    pub fn mul_dense(&self, z: &DenseMatrix) -> DenseMatrix {
        assert_eq!(z.rows(), self.cols, "sparse-dense product dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, z.cols());
        for i in 0..self.rows {
            let range = self.offsets[i]..self.offsets[i + 1];
            let out_row = out.row_mut(i);
            for (&j, &v) in self.indices[range.clone()].iter().zip(&self.values[range]) {
                super::dense::axpy(v, z.row(j), out_row);
            }
        }
        out
    }

    /// Sparse × sparse product.
    pub fn mul_sparse(&self, other: &SparseMatrix) -> Result<SparseMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = vec![0.0; other.cols];
        let mut touched = vec![false; other.cols];
        let mut pattern = Vec::new();
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.rows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !touched[j] {
                        touched[j] = true;
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                indices.push(j);
                values.push(acc[j]);
                acc[j] = 0.0;
                touched[j] = false;
            }
            pattern.clear();
            offsets.push(indices.len());
        }
        Ok(SparseMatrix {
            rows: self.rows,
            cols: other.cols,
            offsets,
            indices,
            values,
        })
    }

    /// `a·self + b·other` over the union pattern.
    pub fn linear_combination(
        &self,
        a: f64,
        other: &SparseMatrix,
        b: f64,
    ) -> Result<SparseMatrix, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.rows {
            let mut left = self.row(i).peekable();
            let mut right = other.row(i).peekable();
            loop {
                let next = match (left.peek(), right.peek()) {
                    (Some(&(j1, v1)), Some(&(j2, v2))) => {
                        if j1 == j2 {
                            left.next();
                            right.next();
                            (j1, a * v1 + b * v2)
                        } else if j1 < j2 {
                            left.next();
                            (j1, a * v1)
                        } else {
                            right.next();
                            (j2, b * v2)
                        }
                    }
                    (Some(&(j, v)), None) => {
                        left.next();
                        (j, a * v)
                    }
                    (None, Some(&(j, v))) => {
                        right.next();
                        (j, b * v)
                    }
                    (None, None) => break,
                };
                indices.push(next.0);
                values.push(next.1);
            }
            offsets.push(indices.len());
        }
        Ok(SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            offsets,
            indices,
            values,
        })
    }

    pub fn scale(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Drops stored entries whose magnitude is `<= tol`.
    pub fn pruned(&self, tol: f64) -> SparseMatrix {
        SparseMatrix::from_triplets(
            self.rows,
            self.cols,
            self.triplets().filter(|&(_, _, v)| v.abs() > tol),
        )
        .expect("pruning keeps indices valid")
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        match self.linear_combination(1.0, &t, -1.0) {
            Ok(diff) => diff.values.iter().all(|v| v.abs() <= tol),
            Err(_) => false,
        }
    }

    /// `(self + selfᵀ) / 2`.
    pub fn symmetrized(&self) -> Result<SparseMatrix, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        self.linear_combination(0.5, &self.transpose(), 0.5)
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMatrix::from_triplets(2, 3, [(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5)]).unwrap();
        assert_eq!(m.indices(), &[0, 2]);
        assert_eq!(m.values(), &[2.0, 1.5]);
        assert_eq!(m.offsets(), &[0, 2, 2]);
    }

    #[test]
    fn transpose_and_products_match_dense() {
        let m = SparseMatrix::from_triplets(3, 2, [(0, 1, 2.0), (1, 0, -1.0), (2, 0, 3.0), (2, 1, 1.0)])
            .unwrap();
        let d = m.to_dense();
        assert_eq!(m.transpose().to_dense(), d.transpose());
        let prod = m.mul_sparse(&m.transpose()).unwrap().to_dense();
        assert_eq!(prod, d.matmul(&d.transpose()).unwrap());
        let z = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.mul_dense(&z), d.matmul(&z).unwrap());
    }

    #[test]
    fn csr_validation() {
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn symmetrize() {
        let m = SparseMatrix::from_triplets(2, 2, [(0, 1, 2.0)]).unwrap();
        assert!(!m.is_symmetric(1e-12));
        let s = m.symmetrized().unwrap();
        assert!(s.is_symmetric(0.0));
        assert_eq!(s.get(1, 0), 1.0);
    }
}
