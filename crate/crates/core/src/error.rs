use thiserror::Error;

/// Errors raised by the simulator.
///
/// Every message starts with a stable kebab-case tag naming the violated
/// precondition; the CLI forwards the message verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension-mismatch: {0}")]
    DimensionMismatch(String),

    #[error("contract-violation: {0}")]
    ContractViolation(String),

    #[error("not-PSD: minimum eigenvalue {min_eigenvalue:e} is below the clipping floor")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid-Bloch: |p| = {norm} exceeds 1")]
    InvalidBloch { norm: f64 },

    #[error("invalid-parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid-state: {0}")]
    InvalidState(String),

    #[error("exceptional-state: |alpha| = {alpha} has no finite-spin separable equivalent")]
    Exceptional { alpha: f64 },

    #[error("separability-range: |alpha| = {alpha} exceeds S/(S+1) = {bound} at S = {spin}")]
    SeparabilityRange { alpha: f64, spin: String, bound: f64 },

    #[error("capacity: 2S = {twice} exceeds the supported maximum {max}")]
    Capacity { twice: u32, max: u32 },

    #[error("invalid-input: {0}")]
    InvalidInput(String),

    #[error("numerical-instability: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
