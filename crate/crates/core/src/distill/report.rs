use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{PipelineConfig, PipelineKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub examples: usize,
    pub epochs: usize,
    /// Corpus F1 of the stage's model against its own training targets.
    pub train_f1: f64,
    pub test_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionStats {
    pub n: usize,
    pub high: usize,
    pub low: usize,
    pub threshold: f64,
    pub r_percent: f64,
    pub high_teacher_gold_f1: Option<f64>,
    pub low_teacher_gold_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerStats {
    pub relabeled: usize,
    /// Mean F1 between each peer label and the teacher label it replaced.
    pub peer_vs_teacher_f1: f64,
    pub peer_gold_f1: Option<f64>,
    pub replaced_teacher_gold_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfLabelStats {
    pub total: usize,
    pub kept: usize,
    pub mean_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub pipeline: PipelineKind,
    pub config: PipelineConfig,
    pub stages: Vec<StageReport>,
    pub partition: Option<PartitionStats>,
    pub peer: Option<PeerStats>,
    pub self_labels: Option<SelfLabelStats>,
    /// Test F1 of the final model, when a test set was given.
    pub test_f1: Option<f64>,
    pub warnings: Vec<String>,
}

impl PipelineReport {
    pub(crate) fn new(pipeline: PipelineKind, config: &PipelineConfig) -> Self {
        PipelineReport {
            pipeline,
            config: PipelineConfig {
                kind: pipeline,
                ..config.clone()
            },
            stages: Vec::new(),
            partition: None,
            peer: None,
            self_labels: None,
            test_f1: None,
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One row per stage of every report.
pub fn reports_to_csv(reports: &[PipelineReport]) -> String {
    let mut out = String::from("pipeline,seed,stage,examples,epochs,train_f1,test_f1\n");
    for r in reports {
        for s in &r.stages {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{}",
                r.pipeline,
                r.config.seed,
                s.stage,
                s.examples,
                s.epochs,
                s.train_f1,
                opt(s.test_f1)
            );
        }
    }
    out
}
