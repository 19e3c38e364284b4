//! Closed convex sets with closed-form metric projections, and their
//! μ-relaxations.

use crate::{tf, Error, Result, Scalar};

/// The convex sets the algorithms instantiate. Each has an exact
/// closed-form projection.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet<T> {
    /// `{x : lo ≤ x ≤ hi}` componentwise.
    Box { lo: Vec<T>, hi: Vec<T> },
    /// The nonnegative orthant.
    NonNeg,
    /// A single point.
    Singleton(Vec<T>),
    /// `{x : ⟨normal, x⟩ ≤ offset}`.
    Halfspace { normal: Vec<T>, offset: T },
    /// No constraint.
    WholeSpace,
}

impl<T: Scalar> ConvexSet<T> {
    /// Uniform box `[lo, hi]^dim`.
    pub fn uniform_box(lo: T, hi: T, dim: usize) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidParameter("box requires lo <= hi".into()));
        }
        Ok(ConvexSet::Box {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        })
    }

    pub fn boxed(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidParameter("box requires lo <= hi".into()));
        }
        Ok(ConvexSet::Box { lo, hi })
    }

    pub fn halfspace(normal: Vec<T>, offset: T) -> Result<Self> {
        if normal.iter().all(|&v| v == T::zero()) {
            return Err(Error::InvalidParameter("halfspace normal is zero".into()));
        }
        Ok(ConvexSet::Halfspace { normal, offset })
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        let expected = match self {
            ConvexSet::Box { lo, .. } => Some(lo.len()),
            ConvexSet::Singleton(p) => Some(p.len()),
            ConvexSet::Halfspace { normal, .. } => Some(normal.len()),
            ConvexSet::NonNeg | ConvexSet::WholeSpace => None,
        };
        match expected {
            Some(e) if e != n => Err(Error::DimensionMismatch { expected: e, got: n }),
            _ => Ok(()),
        }
    }

    /// The nearest point of the set to `x` in the Euclidean norm.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x.len())?;
        Ok(match self {
            ConvexSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&l, &h))| v.max(l).min(h))
                .collect(),
            ConvexSet::NonNeg => x.iter().map(|&v| v.max(T::zero())).collect(),
            ConvexSet::Singleton(p) => p.clone(),
            ConvexSet::Halfspace { normal, offset } => {
                let dot: T = normal.iter().zip(x).map(|(&a, &v)| a * v).sum();
                let excess = dot - *offset;
                if excess <= T::zero() {
                    x.to_vec()
                } else {
                    let nn: T = normal.iter().map(|&a| a * a).sum();
                    let scale = excess / nn;
                    x.iter().zip(normal).map(|(&v, &a)| v - scale * a).collect()
                }
            }
            ConvexSet::WholeSpace => x.to_vec(),
        })
    }

    /// The μ-relaxed projection `(1−μ)x + μ P(x)`, `μ ∈ (0,2)`.
    /// `μ = 1` is the plain projection, computed exactly.
    pub fn relaxed_project(&self, x: &[T], mu: T) -> Result<Vec<T>> {
        if mu <= T::zero() || mu >= tf::<T>(2.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation mu = {mu} outside (0, 2)"
            )));
        }
        let p = self.project(x)?;
        if mu == T::one() {
            return Ok(p);
        }
        Ok(x.iter()
            .zip(&p)
            .map(|(&xv, &pv)| (T::one() - mu) * xv + mu * pv)
            .collect())
    }

    /// Membership test up to `tol` on each defining inequality.
    pub fn contains(&self, x: &[T], tol: T) -> bool {
        match self {
            ConvexSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol),
            ConvexSet::NonNeg => x.iter().all(|&v| v >= -tol),
            ConvexSet::Singleton(p) => x
                .iter()
                .zip(p)
                .all(|(&v, &pv)| (v - pv).abs() <= tol),
            ConvexSet::Halfspace { normal, offset } => {
                let dot: T = normal.iter().zip(x).map(|(&a, &v)| a * v).sum();
                dot <= *offset + tol
            }
            ConvexSet::WholeSpace => true,
        }
    }
}
