use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode index {index} outside 1..={modes}")]
    IndexOutOfRange { index: usize, modes: usize },

    #[error("duplicate or unsorted mode index {0}")]
    DuplicateIndex(usize),

    #[error("mode count {0} not supported (must be 1..=64)")]
    ModeCount(usize),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("weight mismatch: {left} vs {right}")]
    WeightMismatch { left: usize, right: usize },

    #[error("invalid weight {weight} for {modes} modes")]
    InvalidWeight { weight: usize, modes: usize },

    #[error("cannot parse occupation sequence {0:?}: only '0' and '1' are allowed")]
    ParseBits(String),

    #[error("n + d is not an occupation sequence")]
    NotBzf,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix not symmetric: |A[{row},{col}] - A[{col},{row}]| = {deviation:e}")]
    NotSymmetric { row: usize, col: usize, deviation: f64 },

    #[error("basis not orthonormal: Gram deviation {0:e}")]
    NotOrthonormal(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("guard exceeded: {guard} (requested {requested}, limit {limit})")]
    GuardExceeded { guard: &'static str, requested: usize, limit: usize },

    #[error("eigensolver did not converge after {sweeps} sweeps (residual {residual:e})")]
    EigenNotConverged { sweeps: usize, residual: f64 },

    #[error(
        "SCF did not converge after {iterations} iterations \
         (residuals {residual_1:e}, {residual_2:e})"
    )]
    ScfNotConverged { iterations: usize, residual_1: f64, residual_2: f64 },

    #[error("block {sector}: {source}")]
    Block {
        sector: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
