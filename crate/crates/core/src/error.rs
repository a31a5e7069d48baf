use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },
    #[error("matrix is singular for a negative power: min |eigenvalue| {min_abs:e} <= {threshold:e}")]
    SingularMatrix { min_abs: f64, threshold: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("perturbation direction has zero norm")]
    ZeroDirection,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid matrix dimension {0} (expected 1..=16)")]
    InvalidDimension(usize),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("unknown builtin `{0}`")]
    UnknownName(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("derivative order {requested} exceeds available order {available}")]
    InsufficientDerivatives { requested: usize, available: usize },

    #[error("quadrature panel budget exceeded after {panels} panels")]
    PanelBudgetExceeded { panels: u64 },
    #[error("dimension {0} unsupported (max 3)")]
    DimensionUnsupported(usize),

    #[error("Fourier grid too coarse: {grid_n} < required {required}")]
    GridTooCoarse { grid_n: usize, required: usize },
    #[error("probe spacing {spacing:e} exceeds the allowed {allowed:e}")]
    ProbeTooCoarse { spacing: f64, allowed: f64 },
    #[error("point is not covered by any packet")]
    UncoveredPoint,

    #[error("fit input contains a non-positive value at index {0}")]
    NonPositiveValue(usize),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
