//! Small dense-tensor kernel with reverse-mode autodiff, the layers the
//! similarity model needs, Adam, and finite-difference gradient checks.

mod gradcheck;
pub mod kernels;
mod optim;
mod params;
mod tape;
mod tensor;

use thiserror::Error;

pub use gradcheck::{grad_check, grad_check_coords, relative_error};
pub use optim::{AdamConfig, AdamState};
pub use params::{ParamId, ParamStore, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use tape::{sigmoid, Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("value does not belong to this tape")]
    DetachedTensor,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
