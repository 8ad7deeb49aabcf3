//! Matrix-free Tucker approximation of 3-tensors.
//!
//! Every algorithm in this crate touches the tensor only through the
//! tensor-by-vector-by-vector product ("tenvec"), exposed by the
//! [`TenvecSource`] trait. Dense, sparse, canonical, Tucker and implicit
//! Hadamard-of-Tucker backends are provided in [`source`].
//!
//! The main entry points are:
//!
//! - [`krylov::mkr`] and [`krylov::optimized_mkr`]: minimal Krylov recursion
//!   and its ALS-optimized variant.
//! - [`wedderburn::tucker_approximate`]: Wedderburn elimination with the
//!   `Wsvd`, `Wlnc`, `WsvdR` and `WlncR` pivoting strategies.
//! - [`matrix_wedderburn`]: the matrix-level Wedderburn machinery (WCP,
//!   Lanczos bidiagonalization) the tensor methods are built on.
//! - [`oracle`]: dense baselines (HOSVD, Tucker-ALS, multi-restart rank-1).

pub mod error;
pub mod krylov;
pub mod linalg;
pub mod matrix_wedderburn;
pub mod mode;
pub mod oracle;
pub mod report;
pub mod source;
pub mod tensor;
pub mod wedderburn;

pub use error::{Error, Result};
pub use mode::Mode;
pub use report::{Estimator, ModeOutcome, RunReport, StepRecord, Termination};
pub use source::{
    CanonicalTensor, CountingSource, HadamardTuckerSource, SparseTensor3, TenvecSource,
};
pub use tensor::{DenseTensor3, Matrix, TuckerTensor, Vector};
