//! Knowledge distillation from noisy teachers for constituency parsing.
//!
//! The crate holds the whole pipeline: trees and unlabeled evaluation
//! ([`treebank`]), a perceptron span parser used as the student
//! ([`student`]), synthetic corpora with simulated teacher noise
//! ([`teachersim`]), the distillation pipelines including the
//! convergence-based partition ([`distill`]), the measurement suite
//! ([`analysis`]) and declarative experiment configs ([`experiment`]).

pub mod analysis;
pub mod distill;
pub mod experiment;
pub mod io;
pub mod student;
pub mod teachersim;
pub mod treebank;

pub use student::{StudentModel, TrainConfig, TrainTrace};
pub use treebank::{ConstituencyTree, SpanPolicy, SpanSet, Token};
