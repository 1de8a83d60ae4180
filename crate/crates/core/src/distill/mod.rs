//! Distillation pipelines over teacher-labeled corpora, and the
//! convergence-based partition that separates cleaner teacher labels from
//! noisier ones.

mod partition;
mod pipelines;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::student::{SentenceFeatures, StudentError, TrainConfig, TrainItem, TrainTrace};
use crate::teachersim::AnnotatedExample;
use crate::treebank::{corpus_f1, ConstituencyTree, SpanPolicy, TreebankError};
use crate::StudentModel;

pub use partition::{partition_by_convergence, partition_by_scores, PartitionResult};
pub(crate) use partition::partition_scores;
pub(crate) use pipelines::stage_seed;
pub use pipelines::{
    run_pa_kd, run_pipeline, run_sd, run_sd_from, run_sd_hc, run_sd_hc_from, run_selective_kd, run_slkd,
    run_supervised,
};
pub use report::{reports_to_csv, PartitionStats, PeerStats, PipelineReport, SelfLabelStats, StageReport};

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("example {0} has no teacher label")]
    MissingTeacher(String),
    #[error("example {0} has no student prediction")]
    MissingPrediction(String),
    #[error("example {0} has no gold tree")]
    MissingGold(String),
    #[error("example {0} has no student label")]
    MissingStudent(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("{ids} ids but {scores} scores")]
    ScoreCount { ids: usize, scores: usize },
    #[error("r_percent must lie in (0, 100], got {0}")]
    InvalidRPercent(f64),
    #[error("every self-label was filtered out by the confidence rule")]
    AllFiltered,
    #[error(transparent)]
    Student(#[from] StudentError),
    #[error(transparent)]
    Treebank(#[from] TreebankError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    Slkd,
    Selective,
    PaKd,
    Sd,
    SdHc,
    Supervised,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 6] = [
        PipelineKind::Supervised,
        PipelineKind::Slkd,
        PipelineKind::Sd,
        PipelineKind::SdHc,
        PipelineKind::Selective,
        PipelineKind::PaKd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineKind::Slkd => "slkd",
            PipelineKind::Selective => "selective",
            PipelineKind::PaKd => "pa-kd",
            PipelineKind::Sd => "sd",
            PipelineKind::SdHc => "sd-hc",
            PipelineKind::Supervised => "supervised",
        }
    }
}

impl std::fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PipelineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PipelineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown pipeline {s:?}"))
    }
}

/// Which self-labels survive the high-confidence filter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfidenceRule {
    /// Keep labels whose confidence is strictly above the corpus mean.
    #[default]
    AboveMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub kind: PipelineKind,
    pub s0_epochs: usize,
    pub peer_epochs: usize,
    pub final_epochs: usize,
    /// Epochs for the base student whose decodes become self-labels.
    pub sd_base_epochs: usize,
    pub r_percent: f64,
    pub seed: u64,
    /// Replication of gold labeled examples in every training stream.
    pub beta: f64,
    pub confidence: ConfidenceRule,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kind: PipelineKind::PaKd,
            s0_epochs: 2,
            peer_epochs: 20,
            final_epochs: 20,
            sd_base_epochs: 4,
            r_percent: 50.0,
            seed: 0,
            beta: 0.0,
            confidence: ConfidenceRule::AboveMean,
        }
    }
}

/// The pools a pipeline reads. `train` carries teacher labels, `labeled`
/// carries gold trees, and `test` (gold) is only used for reporting.
#[derive(Debug, Clone, Copy)]
pub struct DistillData<'a> {
    pub train: &'a [AnnotatedExample],
    pub labeled: &'a [AnnotatedExample],
    pub test: &'a [AnnotatedExample],
}

/// Which tree of an example serves as its training target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    Gold,
    Teacher,
    Student,
}

pub(crate) fn label(ex: &AnnotatedExample, source: LabelSource) -> Result<&ConstituencyTree, DistillError> {
    match source {
        LabelSource::Gold => ex.gold.as_ref().ok_or_else(|| DistillError::MissingGold(ex.id.clone())),
        LabelSource::Teacher => ex.teacher.as_ref().ok_or_else(|| DistillError::MissingTeacher(ex.id.clone())),
        LabelSource::Student => ex.student.as_ref().ok_or_else(|| DistillError::MissingStudent(ex.id.clone())),
    }
}

pub(crate) fn features(examples: &[AnnotatedExample]) -> Vec<SentenceFeatures> {
    examples.par_iter().map(|e| SentenceFeatures::new(&e.tokens)).collect()
}

/// Trains a fresh student on `examples` labeled by `source`, with gold
/// `labeled` examples mixed in `config.beta` times per epoch.
pub fn fit(
    examples: &[AnnotatedExample],
    source: LabelSource,
    labeled: &[AnnotatedExample],
    config: &TrainConfig,
    on_epoch: impl FnMut(usize, &StudentModel),
) -> Result<(StudentModel, TrainTrace), DistillError> {
    let feats = features(examples);
    let labeled_feats = if config.beta > 0.0 { features(labeled) } else { Vec::new() };
    fit_with(examples, &feats, source, labeled, &labeled_feats, config, on_epoch)
}

pub(crate) fn fit_with(
    examples: &[AnnotatedExample],
    feats: &[SentenceFeatures],
    source: LabelSource,
    labeled: &[AnnotatedExample],
    labeled_feats: &[SentenceFeatures],
    config: &TrainConfig,
    on_epoch: impl FnMut(usize, &StudentModel),
) -> Result<(StudentModel, TrainTrace), DistillError> {
    let mut items = Vec::with_capacity(examples.len());
    for (ex, f) in examples.iter().zip(feats) {
        items.push(TrainItem::new(&ex.id, &ex.tokens, f, label(ex, source)?)?);
    }
    let mut gold_items = Vec::new();
    if config.beta > 0.0 {
        for (ex, f) in labeled.iter().zip(labeled_feats) {
            gold_items.push(TrainItem::new(&ex.id, &ex.tokens, f, label(ex, LabelSource::Gold)?)?);
        }
    }
    Ok(crate::student::train_items(&items, &gold_items, config, on_epoch)?)
}

/// Decodes every example with the model's averaged weights.
pub fn predict(model: &StudentModel, examples: &[AnnotatedExample]) -> Vec<ConstituencyTree> {
    examples
        .par_iter()
        .map(|e| model.decode_cached(&e.tokens, &SentenceFeatures::new(&e.tokens)))
        .collect()
}

pub(crate) fn predict_with(model: &StudentModel, examples: &[AnnotatedExample], feats: &[SentenceFeatures]) -> Vec<ConstituencyTree> {
    examples
        .par_iter()
        .zip(feats)
        .map(|(e, f)| model.decode_cached(&e.tokens, f))
        .collect()
}

/// Copies of `examples` whose teacher label is `model`'s decode. Gold trees
/// are kept; noise tiers are cleared.
pub fn teacher_labels_from(model: &StudentModel, examples: &[AnnotatedExample]) -> Vec<AnnotatedExample> {
    predict(model, examples)
        .into_iter()
        .zip(examples)
        .map(|(t, e)| AnnotatedExample {
            teacher: Some(t),
            noise_tier: None,
            ..e.clone()
        })
        .collect()
}

/// Mean sentence F1 of `trees` against the examples' `source` trees.
pub fn score_against(
    trees: &[ConstituencyTree],
    examples: &[AnnotatedExample],
    source: LabelSource,
) -> Result<f64, DistillError> {
    let refs = examples.iter().map(|e| label(e, source)).collect::<Result<Vec<_>, _>>()?;
    Ok(corpus_f1(trees.iter(), refs, SpanPolicy::default())?)
}

/// Test F1 of a model against gold trees.
pub fn evaluate(model: &StudentModel, test: &[AnnotatedExample]) -> Result<f64, DistillError> {
    score_against(&predict(model, test), test, LabelSource::Gold)
}
