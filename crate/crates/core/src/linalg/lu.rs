use super::{DenseMatrix, LinalgError};

/// LU factorization with partial pivoting, `P·A = L·U` packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    packed: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Fails with [`LinalgError::Singular`] when a pivot falls below
    /// `1e-13 · max|A|`.
    pub fn factor(a: &DenseMatrix) -> Result<Self, LinalgError> {
        let n = a.rows();
        if n != a.cols() {
            return Err(LinalgError::NotSquare(a.rows(), a.cols()));
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = 1e-13 * a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (piv, pval) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pval <= threshold {
                return Err(LinalgError::Singular { pivot: k });
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    let ukj = lu[(k, j)];
                    lu[(i, j)] -= f * ukj;
                }
            }
        }
        Ok(Self { packed: lu, perm })
    }

    /// Solves `A·X = B` column by column.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        let n = self.packed.rows();
        if b.rows() != n {
            return Err(LinalgError::ShapeMismatch(format!(
                "right-hand side has {} rows, system has {n}",
                b.rows()
            )));
        }
        let mut x = b.select_rows(&self.perm);
        let cols = b.cols();
        for i in 0..n {
            for k in 0..i {
                let l = self.packed[(i, k)];
                if l == 0.0 {
                    continue;
                }
                for c in 0..cols {
                    let v = x[(k, c)];
                    x[(i, c)] -= l * v;
                }
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = self.packed[(i, k)];
                if u == 0.0 {
                    continue;
                }
                for c in 0..cols {
                    let v = x[(k, c)];
                    x[(i, c)] -= u * v;
                }
            }
            let d = self.packed[(i, i)];
            for c in 0..cols {
                x[(i, c)] /= d;
            }
        }
        Ok(x)
    }
}

pub fn lu_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    Lu::factor(a)?.solve(b)
}
