use thiserror::Error;

/// Errors raised by the library. Node indices carried here are 0-based;
/// the `Display` impls render them 1-based.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("negative entry {value} at ({}, {})", .row + 1, .col + 1)]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-finite entry at ({}, {})", .row + 1, .col + 1)]
    NonFinite { row: usize, col: usize },

    #[error("row {} sums to {sum}, outside tolerance {tol:e} of {target}", .row + 1)]
    RowSum { row: usize, sum: f64, target: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid arc: {0}")]
    InvalidArc(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("iteration did not converge in {iterations} iterations (best residual {best_residual:e}, estimate {estimate})")]
    NotConverged { iterations: usize, best_residual: f64, estimate: f64 },

    #[error("fixed vector is ambiguous: eigenspace has dimension {nullity}")]
    Ambiguous { nullity: usize },

    #[error("matrix is singular to working precision (pivot magnitude {pivot:e})")]
    Singular { pivot: f64 },

    #[error("matrix exponential overflowed (norm {norm:e}); subdivide the time interval")]
    ExpOverflow { norm: f64 },

    #[error("consensus not guaranteed: {reason}")]
    ConsensusNotGuaranteed { reason: String },

    #[error("system is not asymptotically stable: {reason}")]
    Unstable { reason: String },

    #[error("lambda equals the identity; the model is French-DeGroot, use the DeGroot verdict")]
    IdentitySusceptibility,

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("{0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
