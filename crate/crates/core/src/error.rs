use thiserror::Error;

/// Errors raised by the simulation and reconstruction layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension {0}: truncation needs at least 2 Fock states")]
    InvalidDimension(usize),

    #[error(
        "truncation unsafe: amplitude {amplitude:.4} needs N_max >= {required}, have {dimension}"
    )]
    TruncationUnsafe {
        amplitude: f64,
        dimension: usize,
        required: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series truncated with residual mass {deficit:.3e} above tolerance {tolerance:.3e}")]
    SeriesTruncation { deficit: f64, tolerance: f64 },

    #[error("vibronic Rabi frequency of Fock state {m} vanishes (|L_m(eta^2)| = {laguerre:.3e})")]
    RabiNull { m: usize, laguerre: f64 },

    #[error(
        "no schedule for m = {m} reaches leakage {budget:.3e} within {k_cap} cycles (best {achieved:.3e})"
    )]
    ScheduleInfeasible {
        m: usize,
        budget: f64,
        achieved: f64,
        k_cap: usize,
    },

    #[error("insufficient coverage: {0}")]
    InsufficientCoverage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
