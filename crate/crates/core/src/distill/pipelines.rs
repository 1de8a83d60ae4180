use log::{info, warn};
use rayon::prelude::*;

use crate::student::{SentenceFeatures, TrainConfig};
use crate::teachersim::AnnotatedExample;
use crate::treebank::{unlabeled_f1, ConstituencyTree, SpanPolicy};
use crate::StudentModel;

use super::report::{PartitionStats, PeerStats, PipelineReport, SelfLabelStats, StageReport};
use super::{
    features, fit, label, partition_scores, predict_with, score_against, DistillData, DistillError, LabelSource,
    PipelineConfig, PipelineKind,
};

const STAGE_S0: u64 = 1;
const STAGE_PEER: u64 = 2;
const STAGE_FINAL: u64 = 3;
const STAGE_SD_BASE: u64 = 4;

/// Per-stage seed. The final stage shares its seed across pipelines so that
/// degenerate configurations reduce to one another exactly.
pub(crate) fn stage_seed(seed: u64, stage: u64) -> u64 {
    let mut z = seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Run<'a> {
    data: DistillData<'a>,
    config: &'a PipelineConfig,
    test_feats: Vec<SentenceFeatures>,
    report: PipelineReport,
}

impl<'a> Run<'a> {
    fn new(kind: PipelineKind, data: DistillData<'a>, config: &'a PipelineConfig) -> Self {
        Run {
            data,
            config,
            test_feats: features(data.test),
            report: PipelineReport::new(kind, config),
        }
    }

    fn stage(
        &mut self,
        name: &str,
        examples: &[AnnotatedExample],
        source: LabelSource,
        epochs: usize,
        seed_tag: u64,
        beta: f64,
    ) -> Result<StudentModel, DistillError> {
        let cfg = TrainConfig {
            epochs,
            seed: stage_seed(self.config.seed, seed_tag),
            beta,
            shuffle: true,
        };
        let (model, _) = fit(examples, source, self.data.labeled, &cfg, |_, _| {})?;
        let train_preds = super::predict(&model, examples);
        let train_f1 = score_against(&train_preds, examples, source)?;
        let test_f1 = if self.data.test.is_empty() {
            None
        } else {
            let preds = predict_with(&model, self.data.test, &self.test_feats);
            Some(score_against(&preds, self.data.test, LabelSource::Gold)?)
        };
        info!(
            "{} {name}: {} examples, {epochs} epochs, train F1 {train_f1:.4}, test F1 {test_f1:?}",
            self.report.pipeline,
            examples.len()
        );
        self.report.stages.push(StageReport {
            stage: name.to_string(),
            examples: examples.len(),
            epochs,
            train_f1,
            test_f1,
        });
        self.report.test_f1 = test_f1;
        Ok(model)
    }

    fn kd_stage(&mut self, name: &str, examples: &[AnnotatedExample], source: LabelSource, epochs: usize, tag: u64) -> Result<StudentModel, DistillError> {
        let beta = self.config.beta;
        self.stage(name, examples, source, epochs, tag, beta)
    }

    /// Trains S0 on every teacher label and splits the training set by how
    /// well S0's predictions agree with those labels.
    fn partition(&mut self) -> Result<(Vec<usize>, Vec<usize>), DistillError> {
        let train = self.data.train;
        let s0 = self.kd_stage("s0", train, LabelSource::Teacher, self.config.s0_epochs, STAGE_S0)?;
        let preds = super::predict(&s0, train);
        let mut scores = Vec::with_capacity(train.len());
        for (ex, pred) in train.iter().zip(&preds) {
            scores.push(unlabeled_f1(pred, label(ex, LabelSource::Teacher)?, SpanPolicy::default())?);
        }
        let ids: Vec<&str> = train.iter().map(|e| e.id.as_str()).collect();
        let (high, low, threshold) = partition_scores(&ids, &scores, self.config.r_percent)?;
        self.report.partition = Some(PartitionStats {
            n: train.len(),
            high: high.len(),
            low: low.len(),
            threshold,
            r_percent: self.config.r_percent,
            high_teacher_gold_f1: teacher_gold_f1(train, &high),
            low_teacher_gold_f1: teacher_gold_f1(train, &low),
        });
        Ok((sorted(high), sorted(low)))
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

fn subset(examples: &[AnnotatedExample], indices: &[usize]) -> Vec<AnnotatedExample> {
    indices.iter().map(|&i| examples[i].clone()).collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn f1(a: &ConstituencyTree, b: &ConstituencyTree) -> f64 {
    unlabeled_f1(a, b, SpanPolicy::default()).expect("trees over one sentence")
}

/// Mean gold F1 of the teacher labels at `indices`, when every one has gold.
fn teacher_gold_f1(examples: &[AnnotatedExample], indices: &[usize]) -> Option<f64> {
    let pairs: Option<Vec<_>> = indices
        .iter()
        .map(|&i| Some((examples[i].teacher.as_ref()?, examples[i].gold.as_ref()?)))
        .collect();
    mean(pairs?.into_iter().map(|(t, g)| f1(t, g)))
}

/// Sequence-level KD: one student trained on every teacher label.
pub fn run_slkd(data: DistillData<'_>, config: &PipelineConfig) -> Result<(StudentModel, PipelineReport), DistillError> {
    let mut run = Run::new(PipelineKind::Slkd, data, config);
    let model = run.kd_stage("final", data.train, LabelSource::Teacher, config.final_epochs, STAGE_FINAL)?;
    Ok((model, run.report))
}

/// Distills from the high-convergence teacher labels alone.
pub fn run_selective_kd(data: DistillData<'_>, config: &PipelineConfig) -> Result<(StudentModel, PipelineReport), DistillError> {
    let mut run = Run::new(PipelineKind::Selective, data, config);
    let (high, _) = run.partition()?;
    let high_set = subset(data.train, &high);
    let model = run.kd_stage("final", &high_set, LabelSource::Teacher, config.final_epochs, STAGE_FINAL)?;
    Ok((model, run.report))
}

/// Peer-advised KD. A peer trained on the high-convergence labels re-annotates
/// the rest, and the final student learns from both.
pub fn run_pa_kd(data: DistillData<'_>, config: &PipelineConfig) -> Result<(StudentModel, PipelineReport), DistillError> {
    let mut run = Run::new(PipelineKind::PaKd, data, config);
    let (high, low) = run.partition()?;
    let high_set = subset(data.train, &high);
    if low.is_empty() {
        let msg = "partition left no low-convergence labels to re-annotate; PA-KD reduces to selective KD";
        warn!("{msg}");
        run.report.warnings.push(msg.to_string());
        let model = run.kd_stage("final", &high_set, LabelSource::Teacher, config.final_epochs, STAGE_FINAL)?;
        return Ok((model, run.report));
    }
    let peer = run.kd_stage("s1", &high_set, LabelSource::Teacher, config.peer_epochs, STAGE_PEER)?;
    let low_set = subset(data.train, &low);
    let peer_labels = super::predict(&peer, &low_set);

    let gold_pairs: Option<Vec<(&ConstituencyTree, &ConstituencyTree, &ConstituencyTree)>> = low_set
        .iter()
        .zip(&peer_labels)
        .map(|(ex, p)| Some((p, ex.teacher.as_ref()?, ex.gold.as_ref()?)))
        .collect();
    run.report.peer = Some(PeerStats {
        relabeled: low.len(),
        peer_vs_teacher_f1: mean(low_set.iter().zip(&peer_labels).map(|(ex, p)| f1(p, ex.teacher.as_ref().unwrap()))).unwrap_or(1.0),
        peer_gold_f1: gold_pairs.as_ref().and_then(|v| mean(v.iter().map(|(p, _, g)| f1(p, g)))),
        replaced_teacher_gold_f1: gold_pairs.as_ref().and_then(|v| mean(v.iter().map(|(_, t, g)| f1(t, g)))),
    });

    // corpus order is kept; only the low examples' labels change
    let mut combined = data.train.to_vec();
    for (&i, tree) in low.iter().zip(peer_labels) {
        combined[i].teacher = Some(tree);
    }
    let model = run.kd_stage("final", &combined, LabelSource::Teacher, config.final_epochs, STAGE_FINAL)?;
    Ok((model, run.report))
}

fn self_label(base: &StudentModel, train: &[AnnotatedExample]) -> Vec<AnnotatedExample> {
    let preds = super::predict(base, train);
    train
        .iter()
        .zip(preds)
        .map(|(ex, p)| AnnotatedExample {
            student: Some(p),
            ..ex.clone()
        })
        .collect()
}

fn sd_base(run: &mut Run<'_>) -> Result<StudentModel, DistillError> {
    let epochs = run.config.sd_base_epochs;
    run.kd_stage("base", run.data.train, LabelSource::Teacher, epochs, STAGE_SD_BASE)
}

/// Self-distillation: a base student trained briefly on teacher labels
/// relabels the training sentences, and a fresh student learns those labels.
pub fn run_sd(data: DistillData<'_>, config: &PipelineConfig) -> Result<(StudentModel, PipelineReport), DistillError> {
    let mut run = Run::new(PipelineKind::Sd, data, config);
    let base = sd_base(&mut run)?;
    sd_final(run, &base)
}

pub fn run_sd_from(base: &StudentModel, data: DistillData<'_>, config: &PipelineConfig) -> Result<(StudentModel, PipelineReport), DistillError> {
    sd_final(Run::new(PipelineKind::Sd, data, config), base)
}

fn sd_final(mut run: Run<'_>, base: &StudentModel) -> Result<(StudentModel, PipelineReport), DistillError> {
    let labeled = self_label(base, run.data.train);
    run.report.self_labels = Some(SelfLabelStats {
        total: labeled.len(),
        kept: labeled.len(),
        mean_confidence: None,
    });
    let epochs = run.config.final_epochs;
    let model = run.kd_stage("final", &labeled, LabelSource::Student, epochs, STAGE_FINAL)?;
    Ok((model, run.report))
}

/// Self-distillation restricted to self-labels whose confidence is above the
/// corpus mean. Sentences whose tree is forced have infinite confidence and
/// are always kept; the mean is taken over finite confidences.
pub fn run_sd_hc(data: DistillData<'_>, config: &PipelineConfig) -> Result<(StudentModel, PipelineReport), DistillError> {
    let mut run = Run::new(PipelineKind::SdHc, data, config);
    let base = sd_base(&mut run)?;
    sd_hc_final(run, &base)
}

pub fn run_sd_hc_from(base: &StudentModel, data: DistillData<'_>, config: &PipelineConfig) -> Result<(StudentModel, PipelineReport), DistillError> {
    sd_hc_final(Run::new(PipelineKind::SdHc, data, config), base)
}

fn sd_hc_final(mut run: Run<'_>, base: &StudentModel) -> Result<(StudentModel, PipelineReport), DistillError> {
    let labeled = self_label(base, run.data.train);
    let confidences: Vec<f64> = labeled
        .par_iter()
        .map(|ex| base.confidence_cached(&ex.tokens, &SentenceFeatures::new(&ex.tokens)))
        .collect();
    let mean_conf = mean(confidences.iter().copied().filter(|c| c.is_finite()));
    let kept: Vec<AnnotatedExample> = labeled
        .into_iter()
        .zip(&confidences)
        .filter(|(_, &c)| c.is_infinite() || mean_conf.is_none_or(|m| c > m))
        .map(|(ex, _)| ex)
        .collect();
    run.report.self_labels = Some(SelfLabelStats {
        total: confidences.len(),
        kept: kept.len(),
        mean_confidence: mean_conf,
    });
    if kept.is_empty() {
        return Err(DistillError::AllFiltered);
    }
    let epochs = run.config.final_epochs;
    let model = run.kd_stage("final", &kept, LabelSource::Student, epochs, STAGE_FINAL)?;
    Ok((model, run.report))
}

/// Plain supervised training on the gold trees of `data.labeled`.
pub fn run_supervised(data: DistillData<'_>, config: &PipelineConfig) -> Result<(StudentModel, PipelineReport), DistillError> {
    let mut run = Run::new(PipelineKind::Supervised, data, config);
    if data.labeled.is_empty() {
        return Err(DistillError::EmptyCorpus);
    }
    let model = run.stage("final", data.labeled, LabelSource::Gold, config.final_epochs, STAGE_FINAL, 0.0)?;
    Ok((model, run.report))
}

pub fn run_pipeline(data: DistillData<'_>, config: &PipelineConfig) -> Result<(StudentModel, PipelineReport), DistillError> {
    match config.kind {
        PipelineKind::Slkd => run_slkd(data, config),
        PipelineKind::Selective => run_selective_kd(data, config),
        PipelineKind::PaKd => run_pa_kd(data, config),
        PipelineKind::Sd => run_sd(data, config),
        PipelineKind::SdHc => run_sd_hc(data, config),
        PipelineKind::Supervised => run_supervised(data, config),
    }
}
