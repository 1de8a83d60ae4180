use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distill::{run_pa_kd, run_supervised, stage_seed, teacher_labels_from, DistillData, PipelineConfig};
use crate::experiment::{build_corpora, CorpusConfig};
use crate::teachersim::{make_teacher_labels, sample_corpus, sample_grammar, GrammarConfig, NoiseConfig};

use super::{denoising_curve, AnalysisError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub size: usize,
    /// pct_student_better at each epoch-end checkpoint, epochs 1 and up.
    pub per_epoch: Vec<f64>,
    /// Mean of `per_epoch`.
    pub mean_pct_student_better: f64,
}

fn check_sizes(sizes: &[usize]) -> Result<(), AnalysisError> {
    if sizes.len() < 2 || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(AnalysisError::InvalidSizes(sizes.to_vec()));
    }
    Ok(())
}

/// For each distillation-set size, draws a teacher-labeled corpus of that
/// size, trains on it for `epochs`, and averages the fraction of sentences
/// where the student beats its teacher over all epoch-end checkpoints.
/// Corpora for different sizes share one sampling stream, so smaller ones
/// are prefixes of larger ones.
pub fn size_sweep(
    grammar: &GrammarConfig,
    sizes: &[usize],
    noise: &NoiseConfig,
    corpus: &CorpusConfig,
    epochs: usize,
    seed: u64,
) -> Result<Vec<SizeRow>, AnalysisError> {
    check_sizes(sizes)?;
    let g = sample_grammar(grammar)?;
    let largest = sample_corpus(&g, *sizes.last().unwrap(), (corpus.min_len, corpus.max_len), stage_seed(seed, 21), "u")?;
    let noise = NoiseConfig {
        seed: stage_seed(seed ^ noise.seed, 22),
        ..noise.clone()
    };
    let labeled = make_teacher_labels(&largest, &noise)?;
    sizes
        .iter()
        .map(|&size| {
            let curve = denoising_curve(&labeled[..size], epochs, seed)?;
            let per_epoch: Vec<f64> = curve.iter().map(|c| c.pct_student_better).collect();
            Ok(SizeRow {
                size,
                mean_pct_student_better: per_epoch.iter().sum::<f64>() / per_epoch.len().max(1) as f64,
                per_epoch,
            })
        })
        .collect()
}

pub fn size_rows_to_csv(rows: &[SizeRow]) -> String {
    let mut out = String::from("size,mean_pct_student_better\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.6}", r.size, r.mean_pct_student_better);
    }
    out
}

/// Average ranks, 1-based; ties share the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRow {
    pub labeled: usize,
    pub sft_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftTable {
    pub rows: Vec<SftRow>,
    pub pakd_labeled: usize,
    pub pakd_f1: f64,
    /// Smallest labeled size whose supervised F1 reaches PA-KD's.
    pub crossover: Option<usize>,
}

impl SftTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("labeled,sft_f1,pakd_f1\n# pakd_labeled={}\n", self.pakd_labeled);
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.6},{:.6}", r.labeled, r.sft_f1, self.pakd_f1);
        }
        out
    }
}

/// Supervised training on growing gold sets against PA-KD whose teacher is
/// itself trained on `pakd_labeled` gold examples and labels the unlabeled
/// pool. The simulated teacher noise plays no part here.
pub fn sft_comparison(
    grammar: &GrammarConfig,
    corpus: &CorpusConfig,
    labeled_sizes: &[usize],
    pakd_labeled: usize,
    pipeline: &PipelineConfig,
) -> Result<SftTable, AnalysisError> {
    if labeled_sizes.is_empty() || labeled_sizes.windows(2).any(|w| w[0] >= w[1]) || pakd_labeled == 0 {
        return Err(AnalysisError::InvalidSizes(labeled_sizes.to_vec()));
    }
    let pool = CorpusConfig {
        labeled: (*labeled_sizes.last().unwrap()).max(pakd_labeled),
        ..corpus.clone()
    };
    let corpora = build_corpora(grammar, &pool, &NoiseConfig::clean(0), pipeline.seed)?;
    let sft = |k: usize| -> Result<(crate::StudentModel, f64), AnalysisError> {
        let data = DistillData {
            train: &[],
            labeled: &corpora.labeled[..k],
            test: &corpora.test,
        };
        let (model, report) = run_supervised(data, pipeline)?;
        Ok((model, report.test_f1.unwrap_or(0.0)))
    };
    let rows = labeled_sizes
        .iter()
        .map(|&k| Ok(SftRow { labeled: k, sft_f1: sft(k)?.1 }))
        .collect::<Result<Vec<_>, AnalysisError>>()?;

    let (teacher, _) = sft(pakd_labeled)?;
    let train = teacher_labels_from(&teacher, &corpora.train);
    let data = DistillData {
        train: &train,
        labeled: &corpora.labeled[..pakd_labeled],
        test: &corpora.test,
    };
    let (_, report) = run_pa_kd(data, pipeline)?;
    let pakd_f1 = report.test_f1.unwrap_or(0.0);
    Ok(SftTable {
        crossover: rows.iter().find(|r| r.sft_f1 >= pakd_f1).map(|r| r.labeled),
        rows,
        pakd_labeled,
        pakd_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_known_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), 0.0);
        // ties get average ranks: y ranks (1.5, 1.5, 3)
        let r = spearman(&[1.0, 2.0, 3.0], &[0.0, 0.0, 1.0]);
        assert!((r - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn sizes_must_be_ascending_and_plural() {
        let g = GrammarConfig::default();
        let c = CorpusConfig::default();
        let n = NoiseConfig::two_tier(0);
        assert!(matches!(size_sweep(&g, &[100], &n, &c, 2, 0), Err(AnalysisError::InvalidSizes(_))));
        assert!(matches!(size_sweep(&g, &[100, 50], &n, &c, 2, 0), Err(AnalysisError::InvalidSizes(_))));
    }

    #[test]
    fn clean_teacher_is_never_beaten() {
        let rows = size_sweep(
            &GrammarConfig::default(),
            &[40, 80],
            &NoiseConfig::clean(0),
            &CorpusConfig::default(),
            3,
            1,
        )
        .unwrap();
        assert!(rows.iter().all(|r| r.mean_pct_student_better == 0.0));
        assert_eq!(rows[1].per_epoch.len(), 3);
    }
}
