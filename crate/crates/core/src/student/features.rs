use std::collections::BTreeMap;
use std::hash::Hasher;

use fnv::FnvHasher;

use crate::treebank::Token;

use super::StudentError;

/// Feature template version; every key starts with it.
pub const TEMPLATE_VERSION: &str = "v1";

pub(crate) const FEATURES_PER_SPAN: usize = 7;

const LEFT_SENTINEL: &str = "<s>";
const RIGHT_SENTINEL: &str = "</s>";

/// Sparse feature counts for one span.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureVector {
    counts: BTreeMap<String, u32>,
}

impl FeatureVector {
    pub fn get(&self, key: &str) -> u32 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Keys repeated by their counts, sorted.
    pub fn keys_multiset(&self) -> Vec<String> {
        self.counts
            .iter()
            .flat_map(|(k, &c)| std::iter::repeat_n(k.clone(), c as usize))
            .collect()
    }
}

pub fn length_bucket(width: usize) -> &'static str {
    match width {
        0 | 1 => "1",
        2 => "2",
        3 => "3",
        4 => "4",
        5 => "5",
        6..=10 => "6-10",
        _ => "11+",
    }
}

pub(crate) fn span_keys(tokens: &[Token], start: usize, end: usize) -> [String; FEATURES_PER_SPAN] {
    let first = tokens[start].surface.as_str();
    let last = tokens[end - 1].surface.as_str();
    let left = if start == 0 {
        LEFT_SENTINEL
    } else {
        tokens[start - 1].surface.as_str()
    };
    let right = if end == tokens.len() {
        RIGHT_SENTINEL
    } else {
        tokens[end].surface.as_str()
    };
    let v = TEMPLATE_VERSION;
    [
        format!("{v}:first={first}"),
        format!("{v}:last={last}"),
        format!("{v}:left={left}"),
        format!("{v}:right={right}"),
        format!("{v}:len={}", length_bucket(end - start)),
        format!("{v}:first+last={first}|{last}"),
        format!("{v}:left+right={left}|{right}"),
    ]
}

pub(crate) fn hash_key(key: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(key.as_bytes());
    h.finish()
}

pub fn extract_features(
    tokens: &[Token],
    span: (usize, usize),
) -> Result<FeatureVector, StudentError> {
    let (start, end) = span;
    if start >= end || end > tokens.len() {
        return Err(StudentError::SpanOutOfRange {
            start,
            end,
            n: tokens.len(),
        });
    }
    let mut counts = BTreeMap::new();
    for key in span_keys(tokens, start, end) {
        *counts.entry(key).or_insert(0) += 1;
    }
    Ok(FeatureVector { counts })
}

/// Hashed feature keys for every span of width two or more, computed once per
/// sentence and reused across decodes.
#[derive(Debug, Clone)]
pub struct SentenceFeatures {
    n: usize,
    keys: Vec<[u64; FEATURES_PER_SPAN]>,
}

impl SentenceFeatures {
    pub fn new(tokens: &[Token]) -> Self {
        let n = tokens.len();
        let mut keys = vec![[0u64; FEATURES_PER_SPAN]; n * (n + 1)];
        for start in 0..n {
            for end in start + 2..=n {
                let names = span_keys(tokens, start, end);
                let slot = &mut keys[start * (n + 1) + end];
                for (h, name) in slot.iter_mut().zip(&names) {
                    *h = hash_key(name);
                }
            }
        }
        SentenceFeatures { n, keys }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub(crate) fn span(&self, start: usize, end: usize) -> &[u64; FEATURES_PER_SPAN] {
        &self.keys[start * (self.n + 1) + end]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::tokens_from_words;

    #[test]
    fn deterministic() {
        let toks = tokens_from_words(&["a", "b", "c", "d"]);
        assert_eq!(
            extract_features(&toks, (1, 3)).unwrap(),
            extract_features(&toks, (1, 3)).unwrap()
        );
    }

    #[test]
    fn sentence_start_uses_left_sentinel() {
        let toks = tokens_from_words(&["a", "b", "c"]);
        let fv = extract_features(&toks, (0, 2)).unwrap();
        assert_eq!(fv.get("v1:left=<s>"), 1);
    }

    #[test]
    fn three_token_template_expansion() {
        let toks = tokens_from_words(&["a", "b", "c"]);
        let fv = extract_features(&toks, (0, 2)).unwrap();
        let mut expected = vec![
            "v1:first=a",
            "v1:last=b",
            "v1:left=<s>",
            "v1:right=c",
            "v1:len=2",
            "v1:first+last=a|b",
            "v1:left+right=<s>|c",
        ];
        expected.sort();
        assert_eq!(fv.keys_multiset(), expected);
    }

    #[test]
    fn width_one_span_has_full_template() {
        let toks = tokens_from_words(&["a"]);
        let fv = extract_features(&toks, (0, 1)).unwrap();
        assert_eq!(fv.len(), 7);
        assert_eq!(fv.get("v1:left+right=<s>|</s>"), 1);
    }

    #[test]
    fn length_buckets() {
        let got: Vec<_> = [1, 2, 3, 4, 5, 6, 10, 11, 40].iter().map(|&w| length_bucket(w)).collect();
        assert_eq!(got, ["1", "2", "3", "4", "5", "6-10", "6-10", "11+", "11+"]);
    }

    #[test]
    fn out_of_range() {
        let toks = tokens_from_words(&["a", "b"]);
        assert!(matches!(
            extract_features(&toks, (1, 3)),
            Err(StudentError::SpanOutOfRange { .. })
        ));
        assert!(extract_features(&toks, (1, 1)).is_err());
    }
}
