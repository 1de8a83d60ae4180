//! Teacher-labeled corpora: a synthetic grammar with gold trees, simulated
//! noisy teachers, and JSONL ingestion of externally produced labels.

mod corpus;
mod corrupt;
mod grammar;

use thiserror::Error;

pub use corpus::{ingest_jsonl, parse_jsonl, write_jsonl, AnnotatedExample, CorpusFile, ExampleRecord};
pub use corrupt::{
    corrupt, make_teacher_labels, random_binary_tree, rotation_count, NoiseConfig, NoiseMode, NoiseTier,
};
pub use grammar::{sample_corpus, sample_grammar, GrammarConfig, Rhs, Rule, SyntheticGrammar};

#[derive(Debug, Error)]
pub enum TeacherSimError {
    #[error("degenerate grammar config: {0}")]
    DegenerateConfig(String),
    #[error("no sentences within length bounds [{min_len}, {max_len}] after the rejection cap")]
    LengthBoundsInfeasible { min_len: usize, max_len: usize },
    #[error("invalid noise config: {0}")]
    InvalidNoise(String),
    #[error("example {0} has no gold tree")]
    MissingGold(String),
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: {field} tree does not match the token sequence")]
    TokenMismatch { line: usize, field: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
