use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{which} Gram matrix is not Hermitian positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite {
        which: &'static str,
        min_eigenvalue: f64,
    },

    #[error("form is not V-elliptic (ellipticity constant {alpha:e})")]
    NotElliptic { alpha: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("negative time {0}")]
    NegativeTime(f64),

    /// `exp(t * lambda) * |x|` leaves the double range at coordinate `index`.
    #[error("exp overflow at coordinate {index} (log magnitude {log_magnitude:.3})")]
    OverflowRisk { index: usize, log_magnitude: f64 },

    #[error("initial state is zero")]
    ZeroInitialState,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("grid is not graded towards the final time")]
    GridNotGraded,

    #[error("integrand is not finite at s = {s}")]
    NonFiniteSample { s: f64 },

    #[error("data are not compatible (verdict {verdict})")]
    NotCompatible { verdict: String },

    #[error("solution path carries no derivative states")]
    MissingDerivatives,

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("truncation too small: need eigenvalues beyond {covered}, asked for {requested}")]
    TruncationTooSmall { covered: f64, requested: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Schema violation in a problem file; `pointer` is a JSON pointer.
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },
}

impl Error {
    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
