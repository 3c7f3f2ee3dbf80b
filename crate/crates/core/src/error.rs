use crate::matcore::C64;

/// Errors raised by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has a non-finite entry")]
    NonFinite,

    #[error("invalid exponent p = {0}")]
    InvalidExponent(f64),

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("spectrum meets the branch cut at {0}")]
    BranchCut(C64),

    #[error("spectral radius {0} >= 1: no certified tail; supply rho < 1 or a closed form")]
    NoCertifiedTail(f64),

    #[error("I - T not injective at this truncation (eigenvalue 1 detected)")]
    EigenvalueOne,

    #[error("spectrum lies on or outside the contour (eigenvalue {0})")]
    SpectrumOutsideContour(C64),

    #[error("lambda I - T is singular at lambda = {0}")]
    Singular(C64),

    #[error("invalid Markov data: {0}")]
    Markov(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
