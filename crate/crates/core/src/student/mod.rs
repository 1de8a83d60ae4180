//! The trainable student: a linear span-scoring parser with exact chart
//! decoding and averaged structured-perceptron training.

mod chart;
mod features;
mod model;
mod train;

use thiserror::Error;

pub use features::{extract_features, length_bucket, FeatureVector, SentenceFeatures, TEMPLATE_VERSION};
pub use model::{Hyperparams, StudentModel, TwoBest, MODEL_FORMAT};
pub use train::{train, train_items, TrainConfig, TrainItem, TrainRecord, TrainTrace};

#[derive(Debug, Error)]
pub enum StudentError {
    #[error("span ({start}, {end}) out of range for {n} tokens")]
    SpanOutOfRange { start: usize, end: usize, n: usize },
    #[error("cannot decode an empty sentence")]
    EmptySentence,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("beta must be a non-negative integer, got {0}")]
    NonIntegerBeta(f64),
    #[error("target tree covers {target} tokens but the sentence has {tokens}")]
    TargetMismatch { tokens: usize, target: usize },
    #[error("model format {found:?} is not {expected:?}")]
    VersionMismatch { found: String, expected: String },
    #[error("corrupt model file at line {line}: {reason}")]
    CorruptModel { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
