use thiserror::Error;

/// Errors raised anywhere in the simulation chain.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HimapError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive definite (eigenvalue {index} = {value:.6e})")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("degenerate phase-shifter row set: {0}")]
    RankDeficient(String),

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("spec file line {line}: {msg}")]
    SpecFile { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for HimapError {
    fn from(e: std::io::Error) -> Self {
        HimapError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HimapError>;
