//! Exact CKY search over unlabeled binary bracketings.
//!
//! A tree's score is the sum of its span scores over all spans of width two
//! or more. Ties prefer the smaller split point at every cell, which makes the
//! winner the lexicographically smallest preorder split sequence among the
//! best-scoring trees.

use crate::treebank::Subtree;

/// Span scores indexed by `(start, end)`; width-1 entries are ignored.
#[derive(Debug, Clone)]
pub(crate) struct SpanScores {
    n: usize,
    scores: Vec<f64>,
}

impl SpanScores {
    pub(crate) fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut scores = vec![0.0; (n + 1) * (n + 1)];
        for start in 0..n {
            for end in start + 2..=n {
                scores[start * (n + 1) + end] = f(start, end);
            }
        }
        SpanScores { n, scores }
    }

    #[inline]
    pub(crate) fn get(&self, start: usize, end: usize) -> f64 {
        self.scores[start * (self.n + 1) + end]
    }
}

fn build(n: usize, start: usize, end: usize, split: &[usize]) -> Subtree {
    if end - start == 1 {
        return Subtree::Leaf(start);
    }
    let k = split[start * (n + 1) + end];
    Subtree::binary(build(n, start, k, split), build(n, k, end, split))
}

pub(crate) fn best_tree(scores: &SpanScores) -> (f64, Subtree) {
    let n = scores.n;
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut best = vec![0.0f64; (n + 1) * (n + 1)];
    let mut split = vec![0usize; (n + 1) * (n + 1)];
    for width in 2..=n {
        for start in 0..=n - width {
            let end = start + width;
            let mut top = f64::NEG_INFINITY;
            let mut arg = start + 1;
            for k in start + 1..end {
                let s = best[idx(start, k)] + best[idx(k, end)];
                if s > top {
                    top = s;
                    arg = k;
                }
            }
            best[idx(start, end)] = scores.get(start, end) + top;
            split[idx(start, end)] = arg;
        }
    }
    (best[idx(0, n)], build(n, 0, n, &split))
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    // children only; the cell's own span score is shared by every candidate
    inner: f64,
    score: f64,
    split: usize,
    left: u8,
    right: u8,
}

fn cand_order(a: &Cand, b: &Cand) -> std::cmp::Ordering {
    b.inner
        .partial_cmp(&a.inner)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.split.cmp(&b.split))
        .then(a.left.cmp(&b.left))
        .then(a.right.cmp(&b.right))
}

/// The two highest-scoring distinct trees. The first always equals
/// [`best_tree`]'s answer; the second is `None` when only one tree exists.
pub(crate) fn two_best(scores: &SpanScores) -> ((f64, Subtree), Option<(f64, Subtree)>) {
    let n = scores.n;
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let leaf = Cand {
        inner: 0.0,
        score: 0.0,
        split: 0,
        left: 0,
        right: 0,
    };
    let mut cells: Vec<Vec<Cand>> = vec![Vec::new(); (n + 1) * (n + 1)];
    for i in 0..n {
        cells[idx(i, i + 1)].push(leaf);
    }
    let mut pool: Vec<Cand> = Vec::new();
    for width in 2..=n {
        for start in 0..=n - width {
            let end = start + width;
            let own = scores.get(start, end);
            pool.clear();
            for k in start + 1..end {
                let l = &cells[idx(start, k)];
                let r = &cells[idx(k, end)];
                // The runner-up of a cell always pairs one side's best with
                // the other side's best or second best.
                for (li, ri) in [(0u8, 0u8), (0, 1), (1, 0)] {
                    if (li as usize) < l.len() && (ri as usize) < r.len() {
                        let inner = l[li as usize].score + r[ri as usize].score;
                        pool.push(Cand {
                            inner,
                            score: own + inner,
                            split: k,
                            left: li,
                            right: ri,
                        });
                    }
                }
            }
            pool.sort_by(cand_order);
            pool.truncate(2);
            cells[idx(start, end)] = pool.clone();
        }
    }

    fn build2(cells: &[Vec<Cand>], n: usize, start: usize, end: usize, rank: usize) -> Subtree {
        if end - start == 1 {
            return Subtree::Leaf(start);
        }
        let c = cells[start * (n + 1) + end][rank];
        Subtree::binary(
            build2(cells, n, start, c.split, c.left as usize),
            build2(cells, n, c.split, end, c.right as usize),
        )
    }

    let root = &cells[idx(0, n)];
    let first = (root[0].score, build2(&cells, n, 0, n, 0));
    let second = (root.len() > 1).then(|| (root[1].score, build2(&cells, n, 0, n, 1)));
    (first, second)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans_of(sub: &Subtree, out: &mut Vec<(usize, usize)>) -> (usize, usize) {
        match sub {
            Subtree::Leaf(i) => (*i, i + 1),
            Subtree::Node { children, .. } => {
                let a = spans_of(&children[0], out);
                let b = spans_of(&children[1], out);
                out.push((a.0, b.1));
                (a.0, b.1)
            }
        }
    }

    #[test]
    fn zero_scores_pick_smallest_splits() {
        let s = SpanScores::from_fn(4, |_, _| 0.0);
        let (score, tree) = best_tree(&s);
        assert_eq!(score, 0.0);
        let mut spans = Vec::new();
        spans_of(&tree, &mut spans);
        spans.sort();
        assert_eq!(spans, vec![(0, 4), (1, 4), (2, 4)]);
    }

    #[test]
    fn prefers_rewarded_span() {
        let s = SpanScores::from_fn(3, |i, j| if (i, j) == (0, 2) { 1.0 } else { 0.0 });
        let (score, tree) = best_tree(&s);
        assert_eq!(score, 1.0);
        let mut spans = Vec::new();
        spans_of(&tree, &mut spans);
        assert!(spans.contains(&(0, 2)));
    }

    #[test]
    fn two_best_on_three_tokens() {
        let s = SpanScores::from_fn(3, |i, j| if (i, j) == (1, 3) { 2.0 } else { 0.5 });
        let ((a, _), second) = two_best(&s);
        let (b, _) = second.unwrap();
        assert_eq!(a, 2.5);
        assert_eq!(b, 1.0);
    }

    #[test]
    fn two_tokens_have_one_tree() {
        let s = SpanScores::from_fn(2, |_, _| 1.0);
        let (_, second) = two_best(&s);
        assert!(second.is_none());
    }
}
