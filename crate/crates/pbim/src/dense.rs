//! Small dense matrices and a one-sided Jacobi SVD. These back the spectral
//! estimators at desk scale and serve as oracles in tests.

use crate::sparse::SparseMatrix;
use crate::{tf, Scalar};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![T::zero(); n_rows * n_cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut out = Self::zeros(n_rows, n_cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_cols);
            out.data[i * n_cols..(i + 1) * n_cols].copy_from_slice(row);
        }
        out
    }

    pub fn from_sparse(a: &SparseMatrix<T>) -> Self {
        let mut out = Self::zeros(a.n_rows(), a.n_cols());
        for (r, c, v) in a.triplets() {
            out.set(r, c, v);
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.n_cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.n_cols + c] = v;
    }

    /// Scales row `r` in place.
    pub fn scale_row(&mut self, r: usize, s: T) {
        for v in &mut self.data[r * self.n_cols..(r + 1) * self.n_cols] {
            *v = *v * s;
        }
    }

    /// Scales column `c` in place.
    pub fn scale_col(&mut self, c: usize, s: T) {
        for r in 0..self.n_rows {
            self.data[r * self.n_cols + c] = self.data[r * self.n_cols + c] * s;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| {
                let row = &self.data[r * self.n_cols..(r + 1) * self.n_cols];
                row.iter().zip(x).map(|(&a, &b)| a * b).sum()
            })
            .collect()
    }

    pub fn matvec_transpose(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.n_rows);
        let mut x = vec![T::zero(); self.n_cols];
        for r in 0..self.n_rows {
            let row = &self.data[r * self.n_cols..(r + 1) * self.n_cols];
            for (xc, &a) in x.iter_mut().zip(row) {
                *xc += a * y[r];
            }
        }
        x
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n_cols, self.n_rows);
        for r in 0..self.n_rows {
            for c in 0..self.n_cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// All singular values in descending order, via one-sided Jacobi
    /// orthogonalization of the columns of the thinner orientation.
    pub fn singular_values(&self) -> Vec<T> {
        let work = if self.n_cols > self.n_rows {
            self.transpose()
        } else {
            self.clone()
        };
        let m = work.n_rows;
        let n = work.n_cols;
        // column-major copy for cache-friendly column rotations
        let mut cols: Vec<Vec<T>> = (0..n)
            .map(|c| (0..m).map(|r| work.get(r, c)).collect())
            .collect();

        let eps = tf::<T>(1e-15);
        let max_sweeps = 60;
        for _ in 0..max_sweeps {
            let mut rotated = false;
            for i in 0..n {
                for j in (i + 1)..n {
                    let (mut aii, mut ajj, mut aij) = (T::zero(), T::zero(), T::zero());
                    for r in 0..m {
                        let (ci, cj) = (cols[i][r], cols[j][r]);
                        aii += ci * ci;
                        ajj += cj * cj;
                        aij += ci * cj;
                    }
                    if aij.abs() <= eps * (aii * ajj).sqrt() || aij == T::zero() {
                        continue;
                    }
                    rotated = true;
                    let two = tf::<T>(2.0);
                    let tau = (ajj - aii) / (two * aij);
                    let t = if tau >= T::zero() {
                        T::one() / (tau + (T::one() + tau * tau).sqrt())
                    } else {
                        -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                    };
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for r in 0..m {
                        let (ci, cj) = (cols[i][r], cols[j][r]);
                        cols[i][r] = c * ci - s * cj;
                        cols[j][r] = s * ci + c * cj;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<T> = cols
            .iter()
            .map(|col| col.iter().map(|&v| v * v).sum::<T>().sqrt())
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svd_diagonal() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![3.0, 0.0], vec![0.0, -2.0], vec![0.0, 0.0]]);
        let sv = a.singular_values();
        assert!((sv[0] - 3.0).abs() < 1e-12);
        assert!((sv[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn svd_rank_deficient_has_zero() {
        // rank-2 matrix from two outer products
        let u = [vec![1.0, 2.0, -1.0, 0.5], vec![0.0, 1.0, 1.0, -2.0]];
        let v = [vec![1.0, -1.0, 2.0], vec![3.0, 0.0, 1.0]];
        let mut a = DenseMatrix::zeros(4, 3);
        for r in 0..4 {
            for c in 0..3 {
                a.set(r, c, u[0][r] * v[0][c] + u[1][r] * v[1][c]);
            }
        }
        let sv = a.singular_values();
        assert!(sv[1] > 1e-8);
        assert!(sv[2] < 1e-10 * sv[0]);
    }

    #[test]
    fn svd_matches_gram_trace() {
        // sum of squared singular values equals the squared Frobenius norm
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = DenseMatrix::zeros(8, 5);
        let mut frob2 = 0.0;
        for r in 0..8 {
            for c in 0..5 {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a.set(r, c, v);
                frob2 += v * v;
            }
        }
        let sv = a.singular_values();
        let sum2: f64 = sv.iter().map(|s| s * s).sum();
        assert!((sum2 - frob2).abs() < 1e-10 * frob2);
    }
}
