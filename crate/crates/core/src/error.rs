use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("column {0} has (near) zero norm")]
    ZeroColumn(usize),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in solver state at iteration {0}")]
    NonFinite(u64),

    #[error("non-finite value in input data")]
    NonFiniteInput,

    #[error("relative residual undefined for a zero signal")]
    ZeroSignal,

    #[error("insufficient data: need at least {needed} positive samples in window, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("reference vector has zero norm")]
    ZeroReference,

    #[error("no support of size <= {max_support} reproduces the signal within tolerance")]
    Infeasible { max_support: usize },

    #[error("exhaustive oracle limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("spike cascade did not settle after {0} events at one instant")]
    CascadeLimit(usize),

    #[error("malformed file {path}: {msg} (line {line}, column {column})")]
    MalformedFile {
        path: PathBuf,
        line: usize,
        column: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn malformed(path: &std::path::Path, line: usize, column: usize, msg: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.to_path_buf(),
            line,
            column,
            msg: msg.into(),
        }
    }
}
