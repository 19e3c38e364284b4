//! Spectral estimates for the weighted block operators: the largest
//! singular value per block by the power method, and the smallest nonzero
//! singular value by a dense SVD at desk scale.

use crate::dense::DenseMatrix;
use crate::sparse::SparseMatrix;
use crate::weights::{BlockWeights, WeightedBlock};
use crate::{tf, Error, Result, Scalar};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default relative threshold below which a singular value counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Default power-method settings.
pub const DEFAULT_POWER_TOL: f64 = 1e-6;
pub const DEFAULT_POWER_MAX_ITER: usize = 1000;
/// Above this dimension the dense smallest-singular-value path still runs
/// but warns; desk-scale blocks stay below it.
pub const DENSE_THRESHOLD: usize = 4000;

/// Anything that can act as `A` and `Aᵀ` on vectors.
pub trait LinearOperator<T> {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn apply(&self, x: &[T]) -> Vec<T>;
    fn apply_transpose(&self, y: &[T]) -> Vec<T>;
}

impl<T: Scalar> LinearOperator<T> for SparseMatrix<T> {
    fn n_rows(&self) -> usize {
        SparseMatrix::n_rows(self)
    }
    fn n_cols(&self) -> usize {
        SparseMatrix::n_cols(self)
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        self.matvec(x).expect("dimension checked by caller")
    }
    fn apply_transpose(&self, y: &[T]) -> Vec<T> {
        self.matvec_transpose(y).expect("dimension checked by caller")
    }
}

impl<T: Scalar> LinearOperator<T> for DenseMatrix<T> {
    fn n_rows(&self) -> usize {
        DenseMatrix::n_rows(self)
    }
    fn n_cols(&self) -> usize {
        DenseMatrix::n_cols(self)
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        self.matvec(x)
    }
    fn apply_transpose(&self, y: &[T]) -> Vec<T> {
        self.matvec_transpose(y)
    }
}

impl<'a, T: Scalar> LinearOperator<T> for WeightedBlock<'a, T> {
    fn n_rows(&self) -> usize {
        WeightedBlock::n_rows(self)
    }
    fn n_cols(&self) -> usize {
        WeightedBlock::n_cols(self)
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        WeightedBlock::apply(self, x).expect("dimension checked by caller")
    }
    fn apply_transpose(&self, y: &[T]) -> Vec<T> {
        WeightedBlock::apply_transpose(self, y).expect("dimension checked by caller")
    }
}

#[derive(Debug, Clone)]
pub struct PowerMethodResult<T> {
    pub sigma: T,
    pub iterations: usize,
    pub converged: bool,
    /// Rayleigh quotient of `ÂᵀÂ` after each iteration; nondecreasing.
    pub rayleigh_history: Vec<T>,
}

/// Largest singular value `‖Â‖` by power iteration on `ÂᵀÂ`, started from a
/// seeded random vector. Converged when successive Rayleigh quotients agree
/// to within `tol` relatively; otherwise the last estimate is returned with
/// `converged = false`.
pub fn largest_singular_value<T: Scalar, O: LinearOperator<T>>(
    op: &O,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> Result<PowerMethodResult<T>> {
    if tol <= T::zero() {
        return Err(Error::InvalidParameter("power method tol must be > 0".into()));
    }
    let n = op.n_cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<T> = (0..n).map(|_| tf::<T>(rng.gen_range(-1.0..1.0))).collect();
    let nv = norm(&v);
    if nv == T::zero() {
        return Err(Error::ZeroOperator);
    }
    scale(&mut v, T::one() / nv);

    let mut history = Vec::new();
    let mut prev = T::zero();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        let av = op.apply(&v);
        let lambda: T = av.iter().map(|&x| x * x).sum();
        if lambda == T::zero() {
            return Err(Error::ZeroOperator);
        }
        history.push(lambda.sqrt());
        iterations = it + 1;
        if it > 0 && (lambda - prev).abs() <= tol * lambda {
            converged = true;
            break;
        }
        prev = lambda;
        let mut w = op.apply_transpose(&av);
        let nw = norm(&w);
        if nw == T::zero() {
            return Err(Error::ZeroOperator);
        }
        scale(&mut w, T::one() / nw);
        v = w;
    }
    Ok(PowerMethodResult {
        sigma: *history.last().unwrap(),
        iterations,
        converged,
        rayleigh_history: history,
    })
}

/// Smallest nonzero singular value, computed from the full dense spectrum
/// with singular values below `rank_tol · σ_max` discarded as zero.
pub fn smallest_nonzero_singular_value<T: Scalar, O: LinearOperator<T>>(
    op: &O,
    rank_tol: T,
) -> Result<T> {
    let (m, n) = (op.n_rows(), op.n_cols());
    if m.min(n) > DENSE_THRESHOLD {
        eprintln!(
            "warning: dense SVD on a {m}x{n} operator exceeds the desk-scale threshold {DENSE_THRESHOLD}"
        );
    }
    // materialize along the smaller dimension
    let dense = if m <= n {
        let mut d = DenseMatrix::zeros(m, n);
        let mut e = vec![T::zero(); m];
        for i in 0..m {
            e[i] = T::one();
            let row = op.apply_transpose(&e);
            for (j, &v) in row.iter().enumerate() {
                d.set(i, j, v);
            }
            e[i] = T::zero();
        }
        d
    } else {
        let mut d = DenseMatrix::zeros(m, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = op.apply(&e);
            for (i, &v) in col.iter().enumerate() {
                d.set(i, j, v);
            }
            e[j] = T::zero();
        }
        d
    };
    let sv = dense.singular_values();
    let sigma_max = sv[0];
    if sigma_max == T::zero() {
        return Err(Error::ZeroOperator);
    }
    let cutoff = rank_tol * sigma_max;
    sv.iter()
        .rev()
        .find(|&&s| s > cutoff)
        .copied()
        .ok_or(Error::ZeroOperator)
}

/// Per-block largest singular values `σ_t = ‖M_t^{1/2}A_t N^{1/2}‖`, their
/// maximum `σ̄`, and optionally the global smallest nonzero singular
/// value `σ̲`.
#[derive(Debug, Clone)]
pub struct SpectralEstimates<T> {
    pub sigma_max_per_block: Vec<T>,
    pub sigma_bar: T,
    pub sigma_underbar: Option<T>,
    pub tol: T,
    pub iterations_used: Vec<usize>,
    pub all_converged: bool,
}

/// Power-method block norms for every strip of a partitioned system.
pub fn estimate_block_norms<T: Scalar>(
    matrix: &SparseMatrix<T>,
    ranges: &[(usize, usize)],
    weights: &[BlockWeights<T>],
    tol: T,
    max_iter: usize,
    seed: u64,
) -> Result<SpectralEstimates<T>> {
    let mut sigma_max_per_block = Vec::with_capacity(ranges.len());
    let mut iterations_used = Vec::with_capacity(ranges.len());
    let mut all_converged = true;
    for (t, (&range, w)) in ranges.iter().zip(weights).enumerate() {
        let op = WeightedBlock::new(matrix, range, w);
        let est = largest_singular_value(&op, tol, max_iter, seed.wrapping_add(t as u64))?;
        all_converged &= est.converged;
        sigma_max_per_block.push(est.sigma);
        iterations_used.push(est.iterations);
    }
    let sigma_bar = sigma_max_per_block
        .iter()
        .copied()
        .fold(T::zero(), T::max);
    Ok(SpectralEstimates {
        sigma_max_per_block,
        sigma_bar,
        sigma_underbar: None,
        tol,
        iterations_used,
        all_converged,
    })
}

/// `σ̲ = min_t` smallest nonzero singular value of `Â_t`, by the dense
/// route. Invoked on demand: only regularization and bound evaluation
/// need it.
pub fn estimate_smallest<T: Scalar>(
    matrix: &SparseMatrix<T>,
    ranges: &[(usize, usize)],
    weights: &[BlockWeights<T>],
    rank_tol: T,
) -> Result<T> {
    let mut smallest: Option<T> = None;
    for (&range, w) in ranges.iter().zip(weights) {
        let op = WeightedBlock::new(matrix, range, w);
        let s = smallest_nonzero_singular_value(&op, rank_tol)?;
        smallest = Some(match smallest {
            Some(cur) => cur.min(s),
            None => s,
        });
    }
    smallest.ok_or(Error::ZeroOperator)
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

fn scale<T: Scalar>(v: &mut [T], s: T) {
    for x in v {
        *x = *x * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn power_method_diagonal() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        let est = largest_singular_value(&a, 1e-10, 1000, 1).unwrap();
        assert!((est.sigma - 2.0).abs() < 1e-6);
        assert!(est.converged);
    }

    #[test]
    fn power_method_identity_one_step() {
        let a = SparseMatrix::<f64>::identity(5);
        let est = largest_singular_value(&a, 1e-12, 10, 2).unwrap();
        assert!((est.sigma - 1.0).abs() < 1e-12);
        assert_eq!(est.iterations, 2); // first repeat confirms convergence
    }

    #[test]
    fn power_method_zero_operator() {
        let a = SparseMatrix::<f64>::from_triplets(&[], 3, 3).unwrap();
        assert!(matches!(
            largest_singular_value(&a, 1e-8, 100, 3),
            Err(Error::ZeroOperator)
        ));
    }

    #[test]
    fn power_method_matches_dense_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mut a = DenseMatrix::<f64>::zeros(50, 30);
        for r in 0..50 {
            for c in 0..30 {
                a.set(r, c, rng.gen_range(-1.0..1.0));
            }
        }
        let est = largest_singular_value(&a, 1e-9, 5000, 4).unwrap();
        let sv = a.singular_values();
        assert!((est.sigma - sv[0]).abs() < 1e-3 * sv[0]);
    }

    #[test]
    fn rayleigh_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut a = DenseMatrix::zeros(20, 15);
        for r in 0..20 {
            for c in 0..15 {
                a.set(r, c, rng.gen_range(-1.0..1.0));
            }
        }
        let est = largest_singular_value(&a, 1e-12, 500, 5).unwrap();
        for w in est.rayleigh_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0]);
        }
    }

    #[test]
    fn smallest_truncates_zero() {
        let a = DenseMatrix::<f64>::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let s = smallest_nonzero_singular_value(&a, 1e-10).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smallest_identity() {
        let a = SparseMatrix::<f64>::identity(4);
        let s = smallest_nonzero_singular_value(&a, 1e-10).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smallest_rank_two() {
        let u = [vec![1.0, 0.5, -1.0, 2.0], vec![-1.0, 1.0, 0.0, 1.0]];
        let v = [vec![1.0, 2.0, 0.0], vec![0.0, 1.0, -1.0]];
        let mut a = DenseMatrix::<f64>::zeros(4, 3);
        for r in 0..4 {
            for c in 0..3 {
                a.set(r, c, u[0][r] * v[0][c] + u[1][r] * v[1][c]);
            }
        }
        let sv = a.singular_values();
        let s = smallest_nonzero_singular_value(&a, 1e-10).unwrap();
        assert!((s - sv[1]).abs() < 1e-10 * sv[0]);
        assert!(sv[2] < 1e-10 * sv[0]);
    }
}
