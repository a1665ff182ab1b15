//! Separable spin-S equivalents of two-qubit Werner states and the remote
//! state-transfer protocols that run on them, simulated with exact dense
//! density matrices.

pub mod error;
pub mod linalg;
pub mod measure;
pub mod metrics;
pub mod protocol;
pub mod sphere;
pub mod spin;
pub mod state;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
