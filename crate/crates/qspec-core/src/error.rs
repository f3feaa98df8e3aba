use thiserror::Error;

/// Errors produced by model construction, simulation and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dense diagonalization supports at most {max} qubits, got {got}")]
    DenseCapacity { got: usize, max: usize },

    #[error("matrix is not Hermitian (max asymmetry {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("dimension mismatch: expected {expected} qubits, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("omega = {omega} is within {delta:.3e} of the transition pole at {pole}")]
    PoleProximity { omega: f64, pole: f64, delta: f64 },

    #[error("series too short: need at least {min} points, got {got}")]
    SeriesTooShort { got: usize, min: usize },

    #[error("mismatched lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("gap maps are not congruent: {0}")]
    GridMismatch(String),

    #[error("no usable gap ridge found: {0}")]
    NoRidge(String),

    #[error("error model: {0}")]
    ErrorModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
