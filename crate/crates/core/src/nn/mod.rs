//! Dense multilayer perceptrons with hand-written forward and backward passes.

mod adam;
mod checkpoint;
mod gradcheck;
mod mlp;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{finite_difference_grad, max_relative_error, FD_STEP};
pub use mlp::{ForwardCache, GradientSet, Mlp, OutputActivation};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("invalid layer sizes {0:?}")]
    InvalidSizes(Vec<usize>),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
}

pub type Result<T> = std::result::Result<T, NnError>;
