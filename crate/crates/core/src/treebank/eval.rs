use serde::{Deserialize, Serialize};

use super::{ConstituencyTree, TreebankError};

/// Which spans count toward unlabeled F1. Width-1 spans never count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanPolicy {
    /// Score the whole-sentence span as well. Off by default.
    #[serde(default)]
    pub include_root: bool,
}

impl SpanPolicy {
    pub const INCLUDE_ROOT: SpanPolicy = SpanPolicy { include_root: true };
}

/// Sorted, deduplicated unlabeled spans of one sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SpanSet {
    spans: Vec<(usize, usize)>,
}

impl SpanSet {
    pub fn from_spans(mut spans: Vec<(usize, usize)>) -> Self {
        spans.sort_unstable();
        spans.dedup();
        SpanSet { spans }
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn contains(&self, span: (usize, usize)) -> bool {
        self.spans.binary_search(&span).is_ok()
    }

    pub fn intersection_len(&self, other: &SpanSet) -> usize {
        let (mut i, mut j, mut hits) = (0, 0, 0);
        while i < self.spans.len() && j < other.spans.len() {
            match self.spans[i].cmp(&other.spans[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    hits += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        hits
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.spans.iter().copied()
    }
}

pub fn eval_spans(tree: &ConstituencyTree, policy: SpanPolicy) -> SpanSet {
    let n = tree.len();
    let spans = tree
        .nodes()
        .iter()
        .map(|node| (node.start, node.end))
        .filter(|&(s, e)| e - s >= 2 && (policy.include_root || (s, e) != (0, n)))
        .collect();
    SpanSet::from_spans(spans)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(hits: usize, denom: usize, other_len: usize) -> f64 {
    if denom == 0 {
        if other_len == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        hits as f64 / denom as f64
    }
}

/// Precision and recall of `pred` against `gold`. Two empty sets agree
/// perfectly; one empty set against a nonempty one scores zero.
pub fn span_prf(pred: &SpanSet, gold: &SpanSet) -> Prf {
    let hits = pred.intersection_len(gold);
    let precision = ratio(hits, pred.len(), gold.len());
    let recall = ratio(hits, gold.len(), pred.len());
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

pub fn unlabeled_f1(
    pred: &ConstituencyTree,
    gold: &ConstituencyTree,
    policy: SpanPolicy,
) -> Result<f64, TreebankError> {
    if pred.len() != gold.len() {
        return Err(TreebankError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    Ok(span_prf(&eval_spans(pred, policy), &eval_spans(gold, policy)).f1)
}

/// Sentence-level F1 averaged over the corpus.
pub fn corpus_f1<'a, P, R>(preds: P, refs: R, policy: SpanPolicy) -> Result<f64, TreebankError>
where
    P: IntoIterator<Item = &'a ConstituencyTree>,
    R: IntoIterator<Item = &'a ConstituencyTree>,
{
    let preds: Vec<_> = preds.into_iter().collect();
    let refs: Vec<_> = refs.into_iter().collect();
    if preds.len() != refs.len() {
        return Err(TreebankError::AlignmentMismatch {
            preds: preds.len(),
            refs: refs.len(),
        });
    }
    if preds.is_empty() {
        return Err(TreebankError::EmptyCorpus);
    }
    let mut total = 0.0;
    for (p, r) in preds.iter().zip(&refs) {
        total += unlabeled_f1(p, r, policy)?;
    }
    Ok(total / preds.len() as f64)
}
