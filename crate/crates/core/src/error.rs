use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { dims: Vec<usize>, index: Vec<usize> },

    #[error("invalid mode {mode} for a {order}-way tensor")]
    InvalidMode { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error(
        "block principal pivoting did not converge for row {row} after {iterations} iterations \
         ({infeasible} infeasible variables remain)"
    )]
    NotConverged {
        row: usize,
        iterations: usize,
        infeasible: usize,
    },

    #[error("non-finite values produced during {phase}")]
    NonFinite { phase: &'static str },

    #[error("input tensor has zero norm")]
    ZeroTensor,

    #[error("invalid processor grid: {0}")]
    Grid(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
