//! Dense-network numerics: activations, forward and backward passes, Adam,
//! a finite-difference gradient oracle and the checkpoint format.

mod activation;
mod adam;
pub mod checkpoint;
mod gradcheck;
mod mlp;

pub use activation::{activation_apply, Activation, LEAKY_RELU_SLOPE, SELU_ALPHA, SELU_SCALE};
pub use adam::{adam_step, AdamState};
pub use checkpoint::{checkpoint_load, checkpoint_save};
pub use gradcheck::{
    gradient_check, gradient_check_with, min_abs_pre_activation, relative_error,
    RELATIVE_ERROR_FLOOR,
};
pub use mlp::{ForwardCache, GradientBundle, Layer, MlpParameters};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },
    #[error("non-finite gradient {value} in tensor {tensor} at index {index}")]
    NonFiniteGradient {
        tensor: usize,
        index: usize,
        value: f64,
    },
    #[error("unknown activation '{0}'")]
    UnknownActivation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("corrupt checkpoint (line {line}): {message}")]
    Checkpoint { line: usize, message: String },
    #[error("unsupported checkpoint version '{0}'")]
    UnsupportedVersion(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}
