//! Small dense reverse-mode automatic differentiation over `f64` tensors,
//! with Adam, the straight-through Gumbel-softmax estimator, REINFORCE
//! surrogate losses, a named-tensor checkpoint format and a finite-difference
//! gradient checker.

use thiserror::Error;

pub mod checkpoint;
pub mod estimators;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod optim;
pub mod params;
pub mod tensor;

pub use estimators::{moving_baseline, reinforce_loss, DEFAULT_BASELINE_DECAY};
pub use graph::{sample_gumbel, softmax, Graph, Var};
pub use optim::{Adam, AdamConfig};
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutogradError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("loss must have exactly one element, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("optimizer state does not match the parameter store")]
    UninitializedState,
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for AutogradError {
    fn from(e: std::io::Error) -> Self {
        AutogradError::Io(e.to_string())
    }
}
