//! Compressed sparse row storage, row-block partitioning and the
//! matrix-vector kernels every solver step uses.

use std::sync::Arc;

use crate::{Error, Result, Scalar};

/// Sparse matrix in compressed sparse row format.
///
/// Invariants: `row_offsets` is nondecreasing with `n_rows + 1` entries,
/// column indices are strictly increasing within each row, and no explicit
/// zeros are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds a CSR matrix from (row, col, value) triplets. Duplicate
    /// entries are summed; entries that cancel to zero are dropped.
    pub fn from_triplets(
        triplets: &[(usize, usize, T)],
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
        }
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());

        let mut i = 0;
        while i < sorted.len() {
            let (r, c, _) = sorted[i];
            let mut v = T::zero();
            while i < sorted.len() && sorted[i].0 == r && sorted[i].1 == c {
                v = v + sorted[i].2;
                i += 1;
            }
            if v != T::zero() {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a CSR matrix directly from raw parts, validating the invariants.
    pub fn from_parts(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1
            || row_offsets[0] != 0
            || *row_offsets.last().unwrap() != values.len()
            || col_indices.len() != values.len()
        {
            return Err(Error::InvalidParameter("malformed CSR arrays".into()));
        }
        for r in 0..n_rows {
            if row_offsets[r] > row_offsets[r + 1] {
                return Err(Error::InvalidParameter("row_offsets not nondecreasing".into()));
            }
            let row = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidParameter(
                        "column indices not strictly increasing within a row".into(),
                    ));
                }
            }
            if let Some(&c) = row.last() {
                if c >= n_cols {
                    return Err(Error::IndexOutOfRange {
                        row: r,
                        col: c,
                        n_rows,
                        n_cols,
                    });
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let lo = self.row_offsets[r];
        let hi = self.row_offsets[r + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_is_empty(&self, r: usize) -> bool {
        self.row_offsets[r] == self.row_offsets[r + 1]
    }

    /// Sparse product `A x`.
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let mut y = vec![T::zero(); self.n_rows];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut acc = T::zero();
            for (&c, &v) in cols.iter().zip(vals) {
                acc = acc + v * x[c];
            }
            y[r] = acc;
        }
        Ok(y)
    }

    /// Sparse product `Aᵀ y`.
    pub fn matvec_transpose(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                got: y.len(),
            });
        }
        let mut x = vec![T::zero(); self.n_cols];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let yr = y[r];
            for (&c, &v) in cols.iter().zip(vals) {
                x[c] += v * yr;
            }
        }
        Ok(x)
    }

    /// Matvec restricted to the row strip `rows`, producing a vector of the
    /// strip's length.
    pub fn matvec_rows(&self, rows: (usize, usize), x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let (start, end) = rows;
        let mut y = vec![T::zero(); end - start];
        for r in start..end {
            let (cols, vals) = self.row(r);
            let mut acc = T::zero();
            for (&c, &v) in cols.iter().zip(vals) {
                acc = acc + v * x[c];
            }
            y[r - start] = acc;
        }
        Ok(y)
    }

    /// Transposed matvec of the row strip `rows` applied to a strip-length
    /// vector, producing a full-width vector.
    pub fn matvec_transpose_rows(&self, rows: (usize, usize), y: &[T]) -> Result<Vec<T>> {
        let (start, end) = rows;
        if y.len() != end - start {
            return Err(Error::DimensionMismatch {
                expected: end - start,
                got: y.len(),
            });
        }
        let mut x = vec![T::zero(); self.n_cols];
        for r in start..end {
            let (cols, vals) = self.row(r);
            let yr = y[r - start];
            for (&c, &v) in cols.iter().zip(vals) {
                x[c] += v * yr;
            }
        }
        Ok(x)
    }

    /// Per-row weighted squared norms `‖a^i‖²_W = Σ_j W_j a_ij²`.
    /// `W = Id` when absent.
    pub fn weighted_row_norms(&self, w: Option<&[T]>) -> Result<Vec<T>> {
        if let Some(w) = w {
            if w.len() != self.n_cols {
                return Err(Error::DimensionMismatch {
                    expected: self.n_cols,
                    got: w.len(),
                });
            }
            if let Some(j) = w.iter().position(|&wj| wj < T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "negative weight at column {j}"
                )));
            }
        }
        let mut norms = vec![T::zero(); self.n_rows];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut acc = T::zero();
            for (&c, &v) in cols.iter().zip(vals) {
                let wj = w.map_or(T::one(), |w| w[c]);
                acc = acc + wj * v * v;
            }
            norms[r] = acc;
        }
        Ok(norms)
    }

    /// Number of nonzero entries per column.
    pub fn column_nnz_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_cols];
        for &c in &self.col_indices {
            counts[c] += 1;
        }
        counts
    }

    /// Per-column sums of absolute values.
    pub fn column_abs_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.n_cols];
        for (&c, &v) in self.col_indices.iter().zip(&self.values) {
            sums[c] += v.abs();
        }
        sums
    }

    /// Per-row sums of absolute values, restricted to a strip.
    pub fn row_abs_sums(&self, rows: (usize, usize)) -> Vec<T> {
        (rows.0..rows.1)
            .map(|r| {
                let (_, vals) = self.row(r);
                vals.iter().map(|v| v.abs()).sum()
            })
            .collect()
    }

    /// Iterates over all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter()
                .zip(vals)
                .map(move |(&c, &v)| (r, c, v))
                .collect::<Vec<_>>()
        })
    }
}

/// Drops empty rows of `A` together with the matching entries of `b`.
/// Returns the compacted system and the original indices of the kept rows.
pub fn remove_zero_rows<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
) -> Result<(SparseMatrix<T>, Vec<T>, Vec<usize>)> {
    if b.len() != a.n_rows {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows,
            got: b.len(),
        });
    }
    let kept: Vec<usize> = (0..a.n_rows).filter(|&r| !a.row_is_empty(r)).collect();
    let mut row_offsets = Vec::with_capacity(kept.len() + 1);
    row_offsets.push(0);
    let mut col_indices = Vec::with_capacity(a.nnz());
    let mut values = Vec::with_capacity(a.nnz());
    let mut b_out = Vec::with_capacity(kept.len());
    for &r in &kept {
        let (cols, vals) = a.row(r);
        col_indices.extend_from_slice(cols);
        values.extend_from_slice(vals);
        row_offsets.push(col_indices.len());
        b_out.push(b[r]);
    }
    let out = SparseMatrix {
        n_rows: kept.len(),
        n_cols: a.n_cols,
        row_offsets,
        col_indices,
        values,
    };
    Ok((out, b_out, kept))
}

/// A partition of a system into `p` contiguous, disjoint row strips.
#[derive(Debug, Clone)]
pub struct BlockPartition<T> {
    parent: Arc<SparseMatrix<T>>,
    block_row_ranges: Vec<(usize, usize)>,
    rhs_blocks: Vec<Vec<T>>,
}

impl<T: Scalar> BlockPartition<T> {
    /// Splits `A`, `b` into `p` contiguous strips of nearly equal size
    /// (sizes differ by at most one, remainder rows go to the earliest
    /// blocks), in original row order.
    pub fn new(a: Arc<SparseMatrix<T>>, b: &[T], p: usize) -> Result<Self> {
        if b.len() != a.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows(),
                got: b.len(),
            });
        }
        if p == 0 || p > a.n_rows() {
            return Err(Error::InvalidParameter(format!(
                "block count {p} out of range 1..={}",
                a.n_rows()
            )));
        }
        let m = a.n_rows();
        let base = m / p;
        let rem = m % p;
        let mut ranges = Vec::with_capacity(p);
        let mut start = 0;
        for t in 0..p {
            let size = base + usize::from(t < rem);
            ranges.push((start, start + size));
            start += size;
        }
        let rhs_blocks = ranges.iter().map(|&(s, e)| b[s..e].to_vec()).collect();
        Ok(Self {
            parent: a,
            block_row_ranges: ranges,
            rhs_blocks,
        })
    }

    pub fn parent(&self) -> &Arc<SparseMatrix<T>> {
        &self.parent
    }

    pub fn p(&self) -> usize {
        self.block_row_ranges.len()
    }

    pub fn range(&self, t: usize) -> (usize, usize) {
        self.block_row_ranges[t]
    }

    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.block_row_ranges
    }

    pub fn rhs(&self, t: usize) -> &[T] {
        &self.rhs_blocks[t]
    }

    pub fn block_rows(&self, t: usize) -> usize {
        let (s, e) = self.block_row_ranges[t];
        e - s
    }

    /// Replaces the right-hand side, keeping the same strips.
    pub fn with_rhs(&self, b: &[T]) -> Result<Self> {
        if b.len() != self.parent.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.parent.n_rows(),
                got: b.len(),
            });
        }
        let rhs_blocks = self
            .block_row_ranges
            .iter()
            .map(|&(s, e)| b[s..e].to_vec())
            .collect();
        Ok(Self {
            parent: Arc::clone(&self.parent),
            block_row_ranges: self.block_row_ranges.clone(),
            rhs_blocks,
        })
    }
}
