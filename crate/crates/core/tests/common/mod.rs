#![allow(dead_code)]

use pakd_core::treebank::{tokens_from_words, ConstituencyTree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 6] = ["the", "dog", "saw", "a", "cat", "x7"];

fn split_spans(rng: &mut ChaCha8Rng, start: usize, end: usize, out: &mut Vec<(usize, usize)>) {
    if end - start < 2 {
        return;
    }
    out.push((start, end));
    let k = rng.gen_range(start + 1..end);
    split_spans(rng, start, k, out);
    split_spans(rng, k, end, out);
}

/// A random binary tree over `n` tokens, with each non-root bracket dropped
/// with probability `drop` so flat nodes appear too.
pub fn random_tree(n: usize, seed: u64, drop: f64) -> ConstituencyTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<&str> = (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
    let mut spans = Vec::new();
    split_spans(&mut rng, 0, n, &mut spans);
    let kept: Vec<_> = spans
        .into_iter()
        .filter(|&(s, e)| (s, e) == (0, n) || e - s < 2 || !rng.gen_bool(drop))
        .collect();
    ConstituencyTree::from_spans(tokens_from_words(&words), &kept).expect("nested spans")
}

pub fn binary_tree(n: usize, seed: u64) -> ConstituencyTree {
    random_tree(n, seed, 0.0)
}

/// Any tree over 1..=max_n tokens.
pub fn tree(max_n: usize) -> impl Strategy<Value = ConstituencyTree> {
    (1..=max_n, any::<u64>(), 0.0..0.7f64).prop_map(|(n, seed, drop)| random_tree(n, seed, drop))
}

/// Two trees over the same sentence.
pub fn tree_pair(max_n: usize) -> impl Strategy<Value = (ConstituencyTree, ConstituencyTree)> {
    (1..=max_n, any::<u64>(), any::<u64>(), 0.0..0.7f64).prop_map(|(n, a, b, drop)| {
        let x = random_tree(n, a, drop);
        let y = random_tree(n, b, drop).with_tokens(x.tokens().to_vec()).expect("same length");
        (x, y)
    })
}
