use thiserror::Error;

use crate::Mode;

/// Errors raised by tensor and matrix routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(
        "singular Wedderburn pivot: |x^T A y| = {omega:e} is below the threshold {threshold:e}"
    )]
    SingularPivot { omega: f64, threshold: f64 },

    #[error("degenerate direction: A y vanishes")]
    DegenerateDirection,

    #[error("basis for mode {mode} is not orthonormal (Gram deviation {deviation:e})")]
    NotOrthonormal { mode: Mode, deviation: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
