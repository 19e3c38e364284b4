//! The M (and N) weight matrices defining the SIRT family members,
//! built per row-block and applied by row/column scaling.

use std::str::FromStr;

use crate::sparse::SparseMatrix;
use crate::{Error, Result, Scalar};

/// Which member of the SIRT family the weights realize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Landweber,
    Cimmino,
    Cav,
    Drop,
    Sart,
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "landweber" => Ok(WeightKind::Landweber),
            "cimmino" => Ok(WeightKind::Cimmino),
            "cav" => Ok(WeightKind::Cav),
            "drop" => Ok(WeightKind::Drop),
            "sart" => Ok(WeightKind::Sart),
            other => Err(Error::Parse(format!("unknown weight scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for WeightKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            WeightKind::Landweber => "landweber",
            WeightKind::Cimmino => "cimmino",
            WeightKind::Cav => "cav",
            WeightKind::Drop => "drop",
            WeightKind::Sart => "sart",
        };
        f.write_str(s)
    }
}

/// Diagonal weights of one row-block: the diagonal of `M_t`, its square
/// roots, and the diagonal of `N` where the scheme uses one.
#[derive(Debug, Clone)]
pub struct BlockWeights<T> {
    pub kind: WeightKind,
    pub m_diag: Vec<T>,
    pub m_sqrt: Vec<T>,
    pub n_diag: Option<Vec<T>>,
    pub n_sqrt: Option<Vec<T>>,
}

/// Builds the weights of row strip `rows` of `a_full`. Column-dependent
/// quantities (the CAV/DROP nonzero counts, the SART column sums) are taken
/// from the full matrix, row-dependent ones from the block.
pub fn build_weights<T: Scalar>(
    kind: WeightKind,
    a_full: &SparseMatrix<T>,
    rows: (usize, usize),
) -> Result<BlockWeights<T>> {
    let (start, end) = rows;
    let m_t = end - start;
    let block_count = T::from_usize(m_t).unwrap();

    let row_norm2 = |w: Option<&[T]>| -> Result<Vec<T>> {
        let full = a_full.weighted_row_norms(w)?;
        Ok(full[start..end].to_vec())
    };

    let (m_diag, n_diag): (Vec<T>, Option<Vec<T>>) = match kind {
        WeightKind::Landweber => (vec![T::one(); m_t], None),
        WeightKind::Cimmino => {
            let norms = row_norm2(None)?;
            let mut m = Vec::with_capacity(m_t);
            for (i, &n2) in norms.iter().enumerate() {
                if n2 == T::zero() {
                    return Err(Error::ZeroRow(start + i));
                }
                m.push(T::one() / (block_count * n2));
            }
            (m, None)
        }
        WeightKind::Cav => {
            let counts = a_full.column_nnz_counts();
            let w: Vec<T> = counts.iter().map(|&c| T::from_usize(c).unwrap()).collect();
            let norms = row_norm2(Some(&w))?;
            let mut m = Vec::with_capacity(m_t);
            for (i, &n2) in norms.iter().enumerate() {
                if n2 == T::zero() {
                    return Err(Error::ZeroRow(start + i));
                }
                m.push(T::one() / (block_count * n2));
            }
            (m, None)
        }
        WeightKind::Drop => {
            // M = m_t · D_C, N = diag(1/w_j)
            let norms = row_norm2(None)?;
            let mut m = Vec::with_capacity(m_t);
            for (i, &n2) in norms.iter().enumerate() {
                if n2 == T::zero() {
                    return Err(Error::ZeroRow(start + i));
                }
                m.push(T::one() / n2);
            }
            let counts = a_full.column_nnz_counts();
            let mut n = Vec::with_capacity(counts.len());
            for (j, &c) in counts.iter().enumerate() {
                if c == 0 {
                    return Err(Error::ZeroColumn(j));
                }
                n.push(T::one() / T::from_usize(c).unwrap());
            }
            (m, Some(n))
        }
        WeightKind::Sart => {
            let row_sums = a_full.row_abs_sums(rows);
            let mut m = Vec::with_capacity(m_t);
            for (i, &s) in row_sums.iter().enumerate() {
                if s == T::zero() {
                    return Err(Error::ZeroRow(start + i));
                }
                m.push(T::one() / s);
            }
            let col_sums = a_full.column_abs_sums();
            let mut n = Vec::with_capacity(col_sums.len());
            for (j, &s) in col_sums.iter().enumerate() {
                if s == T::zero() {
                    return Err(Error::ZeroColumn(j));
                }
                n.push(T::one() / s);
            }
            (m, Some(n))
        }
    };

    let m_sqrt = m_diag.iter().map(|&v| v.sqrt()).collect();
    let n_sqrt = n_diag
        .as_ref()
        .map(|n| n.iter().map(|&v| v.sqrt()).collect());
    Ok(BlockWeights {
        kind,
        m_diag,
        m_sqrt,
        n_diag,
        n_sqrt,
    })
}

/// The weighted block operator `Â_t = M_t^{1/2} A_t N^{1/2}`, applied
/// without materializing the scaled matrix.
#[derive(Debug, Clone, Copy)]
pub struct WeightedBlock<'a, T> {
    pub matrix: &'a SparseMatrix<T>,
    pub rows: (usize, usize),
    pub weights: &'a BlockWeights<T>,
}

impl<'a, T: Scalar> WeightedBlock<'a, T> {
    pub fn new(
        matrix: &'a SparseMatrix<T>,
        rows: (usize, usize),
        weights: &'a BlockWeights<T>,
    ) -> Self {
        Self {
            matrix,
            rows,
            weights,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.1 - self.rows.0
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.n_cols()
    }

    /// `Â_t x = M^{1/2} A_t N^{1/2} x`.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        let scaled_x;
        let x = match &self.weights.n_sqrt {
            Some(ns) => {
                scaled_x = x.iter().zip(ns).map(|(&v, &s)| v * s).collect::<Vec<_>>();
                &scaled_x[..]
            }
            None => x,
        };
        let mut y = self.matrix.matvec_rows(self.rows, x)?;
        for (v, &s) in y.iter_mut().zip(&self.weights.m_sqrt) {
            *v = *v * s;
        }
        Ok(y)
    }

    /// `Â_tᵀ y = N^{1/2} A_tᵀ M^{1/2} y`.
    pub fn apply_transpose(&self, y: &[T]) -> Result<Vec<T>> {
        let scaled: Vec<T> = y
            .iter()
            .zip(&self.weights.m_sqrt)
            .map(|(&v, &s)| v * s)
            .collect();
        let mut x = self.matrix.matvec_transpose_rows(self.rows, &scaled)?;
        if let Some(ns) = &self.weights.n_sqrt {
            for (v, &s) in x.iter_mut().zip(ns) {
                *v = *v * s;
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example() -> SparseMatrix<f64> {
        SparseMatrix::from_triplets(&[(0, 0, 3.0), (0, 1, 4.0), (1, 1, 5.0)], 2, 2).unwrap()
    }

    #[test]
    fn cimmino_diag() {
        let a = example();
        let w = build_weights(WeightKind::Cimmino, &a, (0, 2)).unwrap();
        assert_eq!(w.m_diag, vec![1.0 / 50.0, 1.0 / 50.0]);
        assert!(w.n_diag.is_none());
    }

    #[test]
    fn landweber_identity() {
        let a = example();
        let w = build_weights(WeightKind::Landweber, &a, (0, 2)).unwrap();
        assert_eq!(w.m_diag, vec![1.0, 1.0]);
    }

    #[test]
    fn sart_row_col_sums() {
        let a = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 2.0)], 2, 2).unwrap();
        let w = build_weights(WeightKind::Sart, &a, (0, 2)).unwrap();
        assert_eq!(w.m_diag, vec![0.5, 0.5]);
        assert_eq!(w.n_diag.as_deref().unwrap(), &[1.0, 1.0 / 3.0]);
    }

    #[test]
    fn cav_uses_full_matrix_counts() {
        // column 0 appears in rows 0 and 2 of the full matrix
        let a = SparseMatrix::<f64>::from_triplets(
            &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0), (2, 0, 1.0)],
            3,
            2,
        )
        .unwrap();
        let w = build_weights(WeightKind::Cav, &a, (0, 1)).unwrap();
        // ‖a^0‖²_W = 2·1 + 2·4 = 10, block size 1
        assert!((w.m_diag[0] - 1.0 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn zero_row_reported() {
        let a = SparseMatrix::from_triplets(&[(0, 0, 1.0)], 2, 1).unwrap();
        match build_weights(WeightKind::Cimmino, &a, (0, 2)) {
            Err(Error::ZeroRow(1)) => {}
            other => panic!("expected ZeroRow(1), got {other:?}"),
        }
    }

    #[test]
    fn weighted_apply_cimmino() {
        let a = example();
        let w = build_weights(WeightKind::Cimmino, &a, (0, 2)).unwrap();
        let op = WeightedBlock::new(&a, (0, 2), &w);
        let y = op.apply(&[1.0, 1.0]).unwrap();
        let s = 50.0_f64.sqrt();
        assert!((y[0] - 7.0 / s).abs() < 1e-14);
        assert!((y[1] - 5.0 / s).abs() < 1e-14);
    }

    #[test]
    fn weighted_adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let triplets: Vec<(usize, usize, f64)> = (0..40)
            .map(|_| {
                (
                    rng.gen_range(0..8),
                    rng.gen_range(0..6),
                    rng.gen_range(0.1..1.0),
                )
            })
            .collect();
        let a = SparseMatrix::from_triplets(&triplets, 8, 6).unwrap();
        for kind in [
            WeightKind::Landweber,
            WeightKind::Cimmino,
            WeightKind::Cav,
            WeightKind::Drop,
            WeightKind::Sart,
        ] {
            let w = match build_weights(kind, &a, (2, 7)) {
                Ok(w) => w,
                Err(_) => continue, // random sparsity may leave empty rows
            };
            let op = WeightedBlock::new(&a, (2, 7), &w);
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ax = op.apply(&x).unwrap();
            let aty = op.apply_transpose(&y).unwrap();
            let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())),
                "adjoint identity failed for {kind}"
            );
        }
    }

    #[test]
    fn cimmino_norm_at_most_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for trial in 0..5 {
            let m = 10;
            let n = 7;
            let mut triplets = Vec::new();
            for r in 0..m {
                for c in 0..n {
                    triplets.push((r, c, rng.gen_range(-1.0..1.0)));
                }
            }
            let a = SparseMatrix::from_triplets(&triplets, m, n).unwrap();
            let w = build_weights(WeightKind::Cimmino, &a, (0, m)).unwrap();
            let op = WeightedBlock::new(&a, (0, m), &w);
            let est = spectral::largest_singular_value(&op, 1e-10, 5000, trial).unwrap();
            assert!(est.sigma <= 1.0 + 1e-6, "Cimmino norm {} > 1", est.sigma);
        }
    }

    #[test]
    fn sart_scaled_norm_at_most_one() {
        // nonnegative matrices, SART scaling keeps the spectral norm at 1
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for trial in 0..5 {
            let m = 8;
            let n = 6;
            let mut triplets = Vec::new();
            for r in 0..m {
                for c in 0..n {
                    triplets.push((r, c, rng.gen_range(0.05..1.0)));
                }
            }
            let a = SparseMatrix::from_triplets(&triplets, m, n).unwrap();
            let w = build_weights(WeightKind::Sart, &a, (0, m)).unwrap();
            let op = WeightedBlock::new(&a, (0, m), &w);
            let est = spectral::largest_singular_value(&op, 1e-10, 5000, trial).unwrap();
            assert!(est.sigma <= 1.0 + 1e-6, "SART norm {} > 1", est.sigma);
        }
    }
}
