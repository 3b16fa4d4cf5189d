//! ListOps: a synthetic prefix-arithmetic language for probing whether
//! tree-structured models can learn to parse.
//!
//! - [`lang`]: tokens, expressions, operator semantics, two evaluators.
//! - [`treebank`]: binary trees, reference parses, shift-reduce transitions.
//! - [`generator`]: seeded, balanced corpus generation and statistics.
//! - [`metrics`]: bracket F1, self-F1, accuracy and restart reports.

pub mod generator;
pub mod lang;
pub mod metrics;
pub mod par;
pub mod treebank;

pub use generator::{Dataset, Example, GenConfig};
pub use lang::{Expr, ListAst, Op, Token};
pub use par::Exec;
pub use treebank::{BinaryTree, Span, Transition, TransitionSeq};
