//! Sentence encoders over ListOps tokens and a shared ten-way classifier.
//!
//! Four encoders share one parameter layout convention: an LSTM baseline, a
//! TreeLSTM that is given the reference parse, RL-SPINN (a shift-reduce
//! parser trained with REINFORCE) and ST-Gumbel (greedy layer-wise merging
//! with a straight-through Gumbel-softmax choice).

use thiserror::Error;

pub mod cells;
pub mod checks;
pub mod config;
pub mod model;

pub use cells::State;
pub use config::{EncoderConfig, EncoderKind};
pub use model::{Forward, Model, Policy, Prediction, StepOutcome};

pub use listops_autograd::AutogradError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error(transparent)]
    Lang(#[from] listops::lang::LangError),
    #[error("tree has {leaves} leaves but the sequence has {tokens} tokens")]
    TreeTokenMismatch { tokens: usize, leaves: usize },
    #[error(transparent)]
    Tree(#[from] listops::treebank::TreeError),
    #[error("empty token sequence")]
    EmptySequence,
    #[error(transparent)]
    Autograd(#[from] AutogradError),
}
