//! Measurements over teacher-labeled corpora and student checkpoints:
//! denoising margins, convergence-ranked buckets, the convergence-disparity
//! experiment, and the size and supervision sweeps.

mod chart;
mod sweeps;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distill::{self, DistillError, LabelSource};
use crate::student::{train_items, SentenceFeatures, StudentError, TrainConfig, TrainItem};
use crate::teachersim::{AnnotatedExample, TeacherSimError};
use crate::treebank::{unlabeled_f1, ConstituencyTree, SpanPolicy};

pub use chart::{line_chart_svg, Series};
pub use sweeps::{size_rows_to_csv, size_sweep, sft_comparison, spearman, SftRow, SftTable, SizeRow};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("example {id} has no {field} tree")]
    MissingField { id: String, field: &'static str },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("sweep needs at least two ascending sizes, got {0:?}")]
    InvalidSizes(Vec<usize>),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Student(#[from] StudentError),
    #[error(transparent)]
    TeacherSim(#[from] TeacherSimError),
}

fn f1(a: &ConstituencyTree, b: &ConstituencyTree) -> f64 {
    unlabeled_f1(a, b, SpanPolicy::default()).expect("trees over one sentence")
}

fn field<'a>(ex: &'a AnnotatedExample, tree: &'a Option<ConstituencyTree>, name: &'static str) -> Result<&'a ConstituencyTree, AnalysisError> {
    tree.as_ref().ok_or_else(|| AnalysisError::MissingField {
        id: ex.id.clone(),
        field: name,
    })
}

/// Gold F1 of the student tree minus gold F1 of the teacher tree.
pub fn delta(example: &AnnotatedExample) -> Result<f64, AnalysisError> {
    let gold = field(example, &example.gold, "gold")?;
    let teacher = field(example, &example.teacher, "teacher")?;
    let student = field(example, &example.student, "student")?;
    Ok(f1(student, gold) - f1(teacher, gold))
}

/// Fraction of values strictly above zero.
pub fn pct_positive(deltas: &[f64]) -> f64 {
    if deltas.is_empty() {
        return 0.0;
    }
    deltas.iter().filter(|&&d| d > 0.0).count() as f64 / deltas.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    /// 0 holds the examples that agree most with their teacher labels.
    pub bucket: usize,
    pub size: usize,
    pub convergence_min: f64,
    pub convergence_max: f64,
    pub mean_convergence: f64,
    pub mean_teacher_gold_f1: Option<f64>,
    pub mean_student_gold_f1: Option<f64>,
    pub pct_student_better: Option<f64>,
}

/// Contiguous ranges covering `0..n` in `k` groups whose sizes differ by at
/// most one, larger groups first.
pub fn balanced_ranges(n: usize, k: usize) -> Vec<std::ops::Range<usize>> {
    let k = k.min(n).max(1);
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Ranks examples by how well their student tree agrees with their teacher
/// tree and summarizes `n_buckets` equal-count groups. Gold columns are only
/// filled when every example has a gold tree.
pub fn bucket_analysis(corpus: &[AnnotatedExample], n_buckets: usize) -> Result<Vec<BucketRow>, AnalysisError> {
    if corpus.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    let mut scored = Vec::with_capacity(corpus.len());
    for ex in corpus {
        let teacher = field(ex, &ex.teacher, "teacher")?;
        let student = field(ex, &ex.student, "student")?;
        let gold = ex.gold.as_ref().map(|g| (f1(teacher, g), f1(student, g)));
        scored.push((ex.id.as_str(), f1(student, teacher), gold));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let has_gold = scored.iter().all(|s| s.2.is_some());
    Ok(balanced_ranges(scored.len(), n_buckets)
        .into_iter()
        .enumerate()
        .map(|(bucket, range)| {
            let rows = &scored[range];
            let gold = || rows.iter().map(|r| r.2.unwrap());
            BucketRow {
                bucket,
                size: rows.len(),
                convergence_min: rows.last().unwrap().1,
                convergence_max: rows[0].1,
                mean_convergence: mean(rows.iter().map(|r| r.1)),
                mean_teacher_gold_f1: has_gold.then(|| mean(gold().map(|g| g.0))),
                mean_student_gold_f1: has_gold.then(|| mean(gold().map(|g| g.1))),
                pct_student_better: has_gold.then(|| {
                    let deltas: Vec<f64> = gold().map(|(t, s)| s - t).collect();
                    pct_positive(&deltas)
                }),
            }
        })
        .collect())
}

pub fn buckets_to_csv(rows: &[BucketRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut out = String::from(
        "bucket,size,convergence_min,convergence_max,mean_convergence,mean_teacher_gold_f1,mean_student_gold_f1,pct_student_better\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{},{},{}",
            r.bucket,
            r.size,
            r.convergence_min,
            r.convergence_max,
            r.mean_convergence,
            opt(r.mean_teacher_gold_f1),
            opt(r.mean_student_gold_f1),
            opt(r.pct_student_better)
        );
    }
    out
}

/// Per-epoch convergence of two students, one trained on the half of the
/// corpus whose teacher labels are closest to gold and one on the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityCurve {
    pub epochs: Vec<usize>,
    /// Mean F1 between student prediction and teacher label, high half.
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    pub high_size: usize,
    pub low_size: usize,
}

impl DisparityCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,s_high,s_low\n");
        for ((e, h), l) in self.epochs.iter().zip(&self.high).zip(&self.low) {
            let _ = writeln!(out, "{e},{h:.6},{l:.6}");
        }
        out
    }
}

/// Trains on `source` labels for `config.epochs` and calls `at_epoch` with
/// the averaged-weight predictions on the training set after every epoch.
pub(crate) fn train_with_checkpoints(
    examples: &[AnnotatedExample],
    source: LabelSource,
    config: &TrainConfig,
    mut at_epoch: impl FnMut(usize, &[ConstituencyTree]),
) -> Result<(), AnalysisError> {
    let feats: Vec<SentenceFeatures> = examples.par_iter().map(|e| SentenceFeatures::new(&e.tokens)).collect();
    let mut items = Vec::with_capacity(examples.len());
    for (ex, f) in examples.iter().zip(&feats) {
        let target = match source {
            LabelSource::Gold => field(ex, &ex.gold, "gold")?,
            LabelSource::Teacher => field(ex, &ex.teacher, "teacher")?,
            LabelSource::Student => field(ex, &ex.student, "student")?,
        };
        items.push(TrainItem::new(&ex.id, &ex.tokens, f, target)?);
    }
    train_items(&items, &[], config, |epoch, model| {
        let preds: Vec<ConstituencyTree> = examples
            .par_iter()
            .zip(&feats)
            .map(|(e, f)| model.decode_cached(&e.tokens, f))
            .collect();
        at_epoch(epoch, &preds);
    })?;
    Ok(())
}

/// Splits at the median gold F1 of teacher labels (ties by id) and records
/// each half's convergence curve.
pub fn disparity_experiment(corpus: &[AnnotatedExample], epochs: usize, seed: u64) -> Result<DisparityCurve, AnalysisError> {
    if corpus.len() < 2 {
        return Err(AnalysisError::EmptyCorpus);
    }
    let mut ranked = Vec::with_capacity(corpus.len());
    for ex in corpus {
        let gold = field(ex, &ex.gold, "gold")?;
        let teacher = field(ex, &ex.teacher, "teacher")?;
        ranked.push((f1(teacher, gold), ex));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    let half = ranked.len() / 2;
    let high: Vec<AnnotatedExample> = ranked[..half].iter().map(|r| r.1.clone()).collect();
    let low: Vec<AnnotatedExample> = ranked[half..].iter().map(|r| r.1.clone()).collect();
    let config = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };
    let curve = |set: &[AnnotatedExample]| -> Result<Vec<f64>, AnalysisError> {
        let mut values = Vec::with_capacity(epochs);
        train_with_checkpoints(set, LabelSource::Teacher, &config, |_, preds| {
            values.push(mean(preds.iter().zip(set).map(|(p, e)| f1(p, e.teacher.as_ref().unwrap()))));
        })?;
        Ok(values)
    };
    Ok(DisparityCurve {
        epochs: (1..=epochs).collect(),
        high: curve(&high)?,
        low: curve(&low)?,
        high_size: high.len(),
        low_size: low.len(),
    })
}

/// Denoising statistics at one epoch-end checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochDenoise {
    pub epoch: usize,
    pub pct_student_better: f64,
    pub mean_delta: f64,
    /// `(tier, pct_student_better)` for every noise tier present.
    pub by_tier: Vec<(usize, f64)>,
}

/// Trains a student on the teacher labels and measures, after every epoch,
/// how often its prediction beats the teacher label against gold.
pub fn denoising_curve(corpus: &[AnnotatedExample], epochs: usize, seed: u64) -> Result<Vec<EpochDenoise>, AnalysisError> {
    if corpus.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    let mut teacher_f1 = Vec::with_capacity(corpus.len());
    for ex in corpus {
        teacher_f1.push(f1(field(ex, &ex.teacher, "teacher")?, field(ex, &ex.gold, "gold")?));
    }
    let mut tiers: Vec<usize> = corpus.iter().filter_map(|e| e.noise_tier).collect();
    tiers.sort_unstable();
    tiers.dedup();
    let config = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };
    let mut out = Vec::with_capacity(epochs);
    train_with_checkpoints(corpus, LabelSource::Teacher, &config, |epoch, preds| {
        let deltas: Vec<f64> = preds
            .iter()
            .zip(corpus)
            .zip(&teacher_f1)
            .map(|((p, e), t)| f1(p, e.gold.as_ref().unwrap()) - t)
            .collect();
        let by_tier = tiers
            .iter()
            .map(|&tier| {
                let d: Vec<f64> = deltas
                    .iter()
                    .zip(corpus)
                    .filter(|(_, e)| e.noise_tier == Some(tier))
                    .map(|(d, _)| *d)
                    .collect();
                (tier, pct_positive(&d))
            })
            .collect();
        out.push(EpochDenoise {
            epoch,
            pct_student_better: pct_positive(&deltas),
            mean_delta: mean(deltas.iter().copied()),
            by_tier,
        });
    })?;
    Ok(out)
}

/// Fills each example's `student` field with the model's prediction.
pub fn with_predictions(model: &crate::StudentModel, corpus: &[AnnotatedExample]) -> Vec<AnnotatedExample> {
    distill::predict(model, corpus)
        .into_iter()
        .zip(corpus)
        .map(|(p, e)| AnnotatedExample {
            student: Some(p),
            ..e.clone()
        })
        .collect()
}

pub fn deltas_to_csv(corpus: &[AnnotatedExample]) -> Result<String, AnalysisError> {
    let mut out = String::from("id,noise_tier,delta\n");
    for ex in corpus {
        let tier = ex.noise_tier.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{:.6}", ex.id, tier, delta(ex)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{parse_bracketed, tokens_from_words};

    fn tree(spans: &[(usize, usize)], n: usize) -> ConstituencyTree {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        ConstituencyTree::from_spans(tokens_from_words(&words), spans).unwrap()
    }

    fn example(id: &str, gold: ConstituencyTree, teacher: ConstituencyTree, student: ConstituencyTree) -> AnnotatedExample {
        AnnotatedExample {
            teacher: Some(teacher),
            student: Some(student),
            ..AnnotatedExample::with_gold(id.into(), gold)
        }
    }

    #[test]
    fn delta_of_matching_student_and_teacher_is_zero() {
        let g = parse_bracketed("(S (A a b) (B c d))").unwrap();
        let t = tree(&[(1, 4), (2, 4)], 4);
        assert_eq!(delta(&example("x", g, t.clone(), t)).unwrap(), 0.0);
    }

    #[test]
    fn delta_of_perfect_student_over_weak_teacher() {
        let gold = tree(&[(1, 7), (2, 7), (3, 7), (4, 7), (5, 7)], 7);
        // shares two of five spans with gold: F1 = 0.4
        let teacher = tree(&[(1, 7), (2, 7), (2, 6), (2, 4), (4, 6)], 7);
        assert!((f1(&teacher, &gold) - 0.4).abs() < 1e-12);
        let d = delta(&example("x", gold.clone(), teacher, gold)).unwrap();
        assert!((d - 0.6).abs() < 1e-12);
    }

    #[test]
    fn delta_needs_all_trees() {
        let g = tree(&[], 3);
        let mut ex = example("x", g.clone(), g.clone(), g);
        ex.student = None;
        assert!(matches!(delta(&ex), Err(AnalysisError::MissingField { field: "student", .. })));
    }

    #[test]
    fn balanced_ranges_cover_everything() {
        for n in 1..60 {
            let r = balanced_ranges(n, 20);
            assert_eq!(r.first().unwrap().start, 0);
            assert_eq!(r.last().unwrap().end, n);
            let sizes: Vec<usize> = r.iter().map(|x| x.len()).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            assert!(sizes.iter().all(|&s| s > 0));
        }
        assert_eq!(balanced_ranges(40, 20).len(), 20);
    }

    #[test]
    fn buckets_when_student_matches_teacher() {
        let corpus: Vec<AnnotatedExample> = (0..40)
            .map(|i| {
                let t = tree(&[(1, 4), (2, 4)], 4);
                let g = tree(&[(0, 2)], 4);
                example(&format!("e{i:02}"), g, t.clone(), t)
            })
            .collect();
        let rows = bucket_analysis(&corpus, 20).unwrap();
        assert_eq!(rows.len(), 20);
        for r in rows {
            assert_eq!(r.mean_convergence, 1.0);
            assert_eq!(r.pct_student_better, Some(0.0));
            assert_eq!(r.size, 2);
        }
    }

    #[test]
    fn buckets_rank_by_convergence() {
        let g = tree(&[(1, 4), (2, 4)], 4);
        let other = tree(&[(0, 2)], 4);
        let corpus = vec![
            example("a", g.clone(), g.clone(), other.clone()),
            example("b", g.clone(), g.clone(), g.clone()),
        ];
        let rows = bucket_analysis(&corpus, 20).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mean_convergence, 1.0);
        assert_eq!(rows[1].mean_convergence, 0.0);
        let mut no_gold = corpus.clone();
        no_gold[0].gold = None;
        assert_eq!(bucket_analysis(&no_gold, 20).unwrap()[0].mean_teacher_gold_f1, None);
        assert!(matches!(bucket_analysis(&[], 20), Err(AnalysisError::EmptyCorpus)));
    }

    #[test]
    fn pct_counts_strict_improvements_only() {
        assert_eq!(pct_positive(&[0.0, 0.1, -0.2, 0.0]), 0.25);
        assert_eq!(pct_positive(&[]), 0.0);
    }
}
