use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OqwError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("walk fails normalization at source sites {sources:?} (max residual {max_residual:.3e})")]
    NotNormalized { sources: Vec<usize>, max_residual: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not column-stochastic: {0}")]
    NotStochastic(String),

    #[error("walk is not ergodic: {0}")]
    NotErgodic(String),

    #[error("taboo operator for site {site} has spectral radius {radius:.6} (walk is not absorbing toward the target)")]
    NonAbsorbing { site: usize, radius: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("series did not converge after {iterations} terms")]
    NoConvergence { iterations: usize },

    #[error("hermitization correction {0:.3e} exceeds drift bound")]
    HermitianDrift(f64),

    #[error("degenerate trajectory step from site {site}: all jump probabilities vanish")]
    DegenerateStep { site: usize },

    #[error("hypotheses not satisfied: {0}")]
    HypothesisFailed(String),
}

pub type Result<T> = std::result::Result<T, OqwError>;
