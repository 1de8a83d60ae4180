use serde::{Deserialize, Serialize};

use crate::teachersim::AnnotatedExample;
use crate::treebank::{unlabeled_f1, SpanPolicy};

use super::DistillError;

/// Split of a teacher-labeled corpus by how closely a student's predictions
/// agree with the teacher labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    /// Ids whose convergence score reaches the threshold, in rank order.
    pub high: Vec<String>,
    /// The remaining ids, in rank order.
    pub low: Vec<String>,
    pub threshold: f64,
    /// `(id, score)` in corpus order.
    pub scores: Vec<(String, f64)>,
    pub r_percent: f64,
}

impl PartitionResult {
    /// Number of examples the requested percentage asks for.
    pub fn nominal_count(&self) -> usize {
        nominal_count(self.r_percent, self.scores.len())
    }
}

pub(crate) fn check_r_percent(r_percent: f64) -> Result<(), DistillError> {
    if r_percent > 0.0 && r_percent <= 100.0 {
        Ok(())
    } else {
        Err(DistillError::InvalidRPercent(r_percent))
    }
}

fn nominal_count(r_percent: f64, n: usize) -> usize {
    ((r_percent * n as f64) / 100.0).ceil().clamp(1.0, n.max(1) as f64) as usize
}

/// Ranks scores descending with ties broken by ascending id, and returns the
/// corpus indices that form the high set (every score at or above the
/// threshold) plus the threshold itself.
pub(crate) fn partition_scores(ids: &[&str], scores: &[f64], r_percent: f64) -> Result<(Vec<usize>, Vec<usize>, f64), DistillError> {
    check_r_percent(r_percent)?;
    if scores.is_empty() {
        return Err(DistillError::EmptyCorpus);
    }
    if ids.len() != scores.len() {
        return Err(DistillError::ScoreCount {
            ids: ids.len(),
            scores: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| ids[a].cmp(ids[b])));
    let k = nominal_count(r_percent, scores.len());
    let threshold = scores[order[k - 1]];
    let (high, low) = order.into_iter().partition(|&i| scores[i] >= threshold);
    Ok((high, low, threshold))
}

/// Partitions precomputed convergence scores. `ids` and `scores` are in
/// corpus order.
pub fn partition_by_scores(ids: &[&str], scores: &[f64], r_percent: f64) -> Result<PartitionResult, DistillError> {
    let (high, low, threshold) = partition_scores(ids, scores, r_percent)?;
    Ok(PartitionResult {
        high: high.iter().map(|&i| ids[i].to_string()).collect(),
        low: low.iter().map(|&i| ids[i].to_string()).collect(),
        threshold,
        scores: ids.iter().map(|s| s.to_string()).zip(scores.iter().copied()).collect(),
        r_percent,
    })
}

/// Scores every example by the unlabeled F1 between its teacher label and
/// its `student` prediction, then keeps the top `r_percent` as the high set.
/// Ties at the threshold all join the high set.
pub fn partition_by_convergence(corpus: &[AnnotatedExample], r_percent: f64) -> Result<PartitionResult, DistillError> {
    check_r_percent(r_percent)?;
    if corpus.is_empty() {
        return Err(DistillError::EmptyCorpus);
    }
    let mut scores = Vec::with_capacity(corpus.len());
    for ex in corpus {
        let teacher = ex.teacher.as_ref().ok_or_else(|| DistillError::MissingTeacher(ex.id.clone()))?;
        let student = ex.student.as_ref().ok_or_else(|| DistillError::MissingPrediction(ex.id.clone()))?;
        scores.push(unlabeled_f1(student, teacher, SpanPolicy::default())?);
    }
    let ids: Vec<&str> = corpus.iter().map(|e| e.id.as_str()).collect();
    partition_by_scores(&ids, &scores, r_percent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(scores: &[f64], r: f64) -> (Vec<usize>, Vec<usize>, f64) {
        let ids: Vec<String> = (0..scores.len()).map(|i| format!("e{i:03}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        partition_scores(&refs, scores, r).unwrap()
    }

    #[test]
    fn ties_at_threshold_join_high() {
        let (high, low, threshold) = run(&[0.9, 0.7, 0.7, 0.2], 50.0);
        assert_eq!(threshold, 0.7);
        assert_eq!(high, vec![0, 1, 2]);
        assert_eq!(low, vec![3]);
    }

    #[test]
    fn full_percentage_takes_everything() {
        let (high, low, threshold) = run(&[0.3, 0.9, 0.1, 0.5], 100.0);
        assert_eq!(high.len(), 4);
        assert!(low.is_empty());
        assert_eq!(threshold, 0.1);
    }

    #[test]
    fn distinct_scores_split_exactly() {
        let scores: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let (high, _, _) = run(&scores, 50.0);
        assert_eq!(high, vec![9, 8, 7, 6, 5]);
    }

    #[test]
    fn rank_order_breaks_ties_by_id() {
        let (high, low, _) = run(&[0.5, 0.5, 1.0, 0.0], 25.0);
        assert_eq!(high, vec![2]);
        assert_eq!(low, vec![0, 1, 3]);
    }

    #[test]
    fn small_percentages_keep_at_least_one() {
        let (high, _, _) = run(&[0.2, 0.4, 0.6], 1.0);
        assert_eq!(high, vec![2]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(partition_scores(&[], &[], 50.0), Err(DistillError::EmptyCorpus)));
        assert!(matches!(partition_scores(&["a"], &[1.0], 0.0), Err(DistillError::InvalidRPercent(_))));
        assert!(matches!(partition_scores(&["a"], &[1.0], 101.0), Err(DistillError::InvalidRPercent(_))));
    }

    #[test]
    fn needs_teacher_and_prediction() {
        let tree = crate::treebank::parse_bracketed("(S a b)").unwrap();
        let mut ex = AnnotatedExample::with_gold("x".into(), tree.clone());
        assert!(matches!(partition_by_convergence(&[ex.clone()], 50.0), Err(DistillError::MissingTeacher(_))));
        ex.teacher = Some(tree);
        assert!(matches!(partition_by_convergence(&[ex], 50.0), Err(DistillError::MissingPrediction(_))));
    }
}
