use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible path selection: {0}")]
    Infeasible(String),

    #[error("search space of {size} candidates exceeds the cap of {cap}")]
    SearchTooLarge { size: u128, cap: u64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("phase undefined for a zero path gain")]
    UndefinedPhase,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no positive crossing point: right-hand side is {rhs:e}")]
    NoCrossing { rhs: f64 },

    #[error("empty result: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
