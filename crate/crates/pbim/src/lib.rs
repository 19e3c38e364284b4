//! Projected block-iterative solvers (P-SIRT, P-BIM, block-CQ) for
//! constrained, noisy linear systems, together with relaxation-parameter
//! schedules, noise-error bound evaluators and a parallel-beam tomography
//! test-problem generator.
//!
//! The core math is generic over the scalar type via [`Scalar`]; concrete
//! `f64` aliases are exported at the crate root (`SparseMatrix64`, ...).

pub mod convex;
pub mod dense;
pub mod harness;
pub mod io;
pub mod relaxation;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod tomo;
pub mod weights;

use std::fmt;

use num_traits::{Float, FromPrimitive, NumAssign};
use thiserror::Error;

/// Scalar type the solvers operate on: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + std::iter::Sum
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for converting an `f64` literal into the working scalar type.
pub(crate) fn tf<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant representable in scalar type")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operator is zero")]
    ZeroOperator,
    #[error("row {0} has zero weighted norm")]
    ZeroRow(usize),
    #[error("column {0} has zero weight")]
    ZeroColumn(usize),
    #[error("iterate diverged at iteration {0}")]
    Diverged(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<V> = std::result::Result<V, Error>;

pub type SparseMatrix64 = sparse::SparseMatrix<f64>;
pub type BlockPartition64 = sparse::BlockPartition<f64>;
pub type ConvexSet64 = convex::ConvexSet<f64>;
pub type DenseMatrix64 = dense::DenseMatrix<f64>;
pub type RelaxationSchedule64 = relaxation::RelaxationSchedule<f64>;
pub type ZetaTable64 = relaxation::ZetaTable<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type BlockSystem64 = solver::BlockSystem<f64>;
pub type Phantom64 = tomo::Phantom<f64>;
pub type ParallelGeometry64 = tomo::ParallelGeometry<f64>;
