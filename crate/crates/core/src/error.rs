use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed CSV content. `row` is the 1-based line number in the file
    /// (the header is row 1).
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Every kernel value vanished. `min_bandwidth` is the smallest bandwidth
    /// (in the possibly standardized covariate space) that reaches a sample.
    #[error("no samples inside the kernel support; bandwidth must be at least {min_bandwidth:.6}")]
    NoNeighbors { min_bandwidth: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("worst case is unbounded: lambda {lambda} below slope norm {required}")]
    UnboundedWorstCase { lambda: f64, required: f64 },

    #[error("sample size {n} too small for this radius schedule; need n >= {min_n}")]
    SampleTooSmall { n: usize, min_n: usize },

    #[error("cost has a kink at sample(s) {0:?}; gradient undefined")]
    Kink(Vec<usize>),

    #[error("linear program is {0}")]
    NotOptimal(&'static str),

    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("zero volatility")]
    ZeroVolatility,

    #[error("need at least 2 returns for a sample standard deviation, have {0}")]
    InsufficientReturns(usize),

    #[error("window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
