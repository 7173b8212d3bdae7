//! Numerical substrate: dense matrices, power iteration, fixed-step RK4,
//! a reverse-mode gradient tape and the Adam optimizer.

mod activation;
mod adam;
mod matrix;
mod rk4;
mod spectral;
pub(crate) mod tape;

pub use activation::Activation;
pub use adam::{AdamConfig, AdamState};
pub use matrix::{dot, norm, Matrix, Vector};
pub use rk4::{rk4_solve, OdeState, Trajectory};
pub use spectral::{spectral_norm, spectral_norm_warm, SpectralNorm, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use tape::{GradientTape, Gradients, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("non-finite state encountered at solver step {step}")]
    NonFiniteState { step: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("backward requires a scalar (1x1) output, got {rows}x{cols}")]
    NonScalarOutput { rows: usize, cols: usize },
}
