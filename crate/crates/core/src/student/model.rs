use std::fmt::Write as _;
use std::path::Path;

use fnv::FnvHashMap;
use serde::{Deserialize, Serialize};

use crate::treebank::{eval_spans, ConstituencyTree, SpanPolicy, Token};

use super::chart::{self, SpanScores};
use super::features::{hash_key, span_keys, SentenceFeatures, TEMPLATE_VERSION};
use super::StudentError;

pub const MODEL_FORMAT: &str = "pakd-model/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub epochs: usize,
    pub shuffle: bool,
    pub template: String,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            epochs: 0,
            shuffle: true,
            template: TEMPLATE_VERSION.to_string(),
        }
    }
}

/// Trained span scorer. Prediction always uses the averaged weights; the raw
/// weights are what online training decodes with.
#[derive(Debug, Clone, Default)]
pub struct StudentModel {
    index: FnvHashMap<u64, usize>,
    keys: Vec<String>,
    raw: Vec<f64>,
    averaged: Vec<f64>,
    pub updates_seen: u64,
    pub epochs_trained: usize,
    pub seed: u64,
    pub hyperparams: Hyperparams,
}

/// Result of a 2-best search.
#[derive(Debug, Clone)]
pub struct TwoBest {
    pub best: ConstituencyTree,
    pub best_score: f64,
    pub second: Option<ConstituencyTree>,
    /// `best_score - second_score`, or infinity when the tree is forced.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Weights {
    Raw,
    Averaged,
}

impl StudentModel {
    pub fn new(seed: u64, hyperparams: Hyperparams) -> Self {
        StudentModel {
            seed,
            hyperparams,
            ..Default::default()
        }
    }

    pub fn num_features(&self) -> usize {
        self.keys.len()
    }

    pub fn raw_weight(&self, key: &str) -> f64 {
        self.index.get(&hash_key(key)).map_or(0.0, |&i| self.raw[i])
    }

    pub fn averaged_weight(&self, key: &str) -> f64 {
        self.index.get(&hash_key(key)).map_or(0.0, |&i| self.averaged[i])
    }

    /// `(key, raw, averaged)` sorted by key.
    pub fn weights(&self) -> Vec<(&str, f64, f64)> {
        let mut out: Vec<_> = self
            .keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.as_str(), self.raw[i], self.averaged[i]))
            .collect();
        out.sort_by(|a, b| a.0.cmp(b.0));
        out
    }

    /// Sets both raw and averaged weight of `key`.
    pub fn set_weight(&mut self, key: &str, value: f64) {
        let i = self.slot(hash_key(key), || key.to_string());
        self.raw[i] = value;
        self.averaged[i] = value;
    }

    /// Multiplies every weight by `factor`.
    pub fn scale(&mut self, factor: f64) {
        self.raw.iter_mut().for_each(|w| *w *= factor);
        self.averaged.iter_mut().for_each(|w| *w *= factor);
    }

    pub(crate) fn slot(&mut self, hash: u64, name: impl FnOnce() -> String) -> usize {
        if let Some(&i) = self.index.get(&hash) {
            return i;
        }
        let i = self.keys.len();
        self.index.insert(hash, i);
        self.keys.push(name());
        self.raw.push(0.0);
        self.averaged.push(0.0);
        i
    }

    pub(crate) fn index_of(&self, hash: u64) -> Option<usize> {
        self.index.get(&hash).copied()
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.raw
    }

    pub(crate) fn set_averaged(&mut self, averaged: Vec<f64>) {
        debug_assert_eq!(averaged.len(), self.raw.len());
        self.averaged = averaged;
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub(crate) fn span_scores(&self, feats: &SentenceFeatures, which: Weights) -> SpanScores {
        let table = match which {
            Weights::Raw => &self.raw,
            Weights::Averaged => &self.averaged,
        };
        SpanScores::from_fn(feats.len(), |start, end| {
            let mut total = 0.0;
            for h in feats.span(start, end) {
                if let Some(&i) = self.index.get(h) {
                    total += table[i];
                }
            }
            total
        })
    }

    pub(crate) fn decode_with(
        &self,
        tokens: &[Token],
        feats: &SentenceFeatures,
        which: Weights,
    ) -> ConstituencyTree {
        let (_, sub) = chart::best_tree(&self.span_scores(feats, which));
        ConstituencyTree::from_subtree(tokens.to_vec(), &sub)
    }

    /// Highest-scoring binary tree under the averaged weights.
    pub fn decode(&self, tokens: &[Token]) -> Result<ConstituencyTree, StudentError> {
        if tokens.is_empty() {
            return Err(StudentError::EmptySentence);
        }
        Ok(self.decode_with(tokens, &SentenceFeatures::new(tokens), Weights::Averaged))
    }

    /// Decodes with a precomputed feature table for `tokens`.
    pub fn decode_cached(&self, tokens: &[Token], feats: &SentenceFeatures) -> ConstituencyTree {
        self.decode_with(tokens, feats, Weights::Averaged)
    }

    /// Score of `tree` under the averaged weights: the sum over its spans of
    /// width two or more.
    pub fn tree_score(&self, tree: &ConstituencyTree) -> f64 {
        let feats = SentenceFeatures::new(tree.tokens());
        let scores = self.span_scores(&feats, Weights::Averaged);
        tree.spans()
            .into_iter()
            .filter(|(s, e)| e - s >= 2)
            .map(|(s, e)| scores.get(s, e))
            .sum()
    }

    pub fn decode_2best(&self, tokens: &[Token]) -> Result<TwoBest, StudentError> {
        if tokens.is_empty() {
            return Err(StudentError::EmptySentence);
        }
        Ok(self.decode_2best_cached(tokens, &SentenceFeatures::new(tokens)))
    }

    pub fn decode_2best_cached(&self, tokens: &[Token], feats: &SentenceFeatures) -> TwoBest {
        let ((best_score, best), second) = chart::two_best(&self.span_scores(feats, Weights::Averaged));
        let best = ConstituencyTree::from_subtree(tokens.to_vec(), &best);
        match second {
            Some((second_score, second)) => TwoBest {
                best,
                best_score,
                second: Some(ConstituencyTree::from_subtree(tokens.to_vec(), &second)),
                margin: (best_score - second_score).max(0.0),
            },
            None => TwoBest {
                best,
                best_score,
                second: None,
                margin: f64::INFINITY,
            },
        }
    }

    /// Length-normalized 2-best margin; infinite when only one tree exists.
    pub fn confidence(&self, tokens: &[Token]) -> Result<f64, StudentError> {
        if tokens.is_empty() {
            return Err(StudentError::EmptySentence);
        }
        Ok(self.confidence_cached(tokens, &SentenceFeatures::new(tokens)))
    }

    pub fn confidence_cached(&self, tokens: &[Token], feats: &SentenceFeatures) -> f64 {
        let two = self.decode_2best_cached(tokens, feats);
        if two.second.is_none() {
            return f64::INFINITY;
        }
        let spans = eval_spans(&two.best, SpanPolicy::default()).len().max(1);
        two.margin / spans as f64
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_FORMAT}");
        let _ = writeln!(out, "seed\t{}", self.seed);
        let _ = writeln!(out, "epochs\t{}", self.hyperparams.epochs);
        let _ = writeln!(out, "shuffle\t{}", self.hyperparams.shuffle);
        let _ = writeln!(out, "template\t{}", self.hyperparams.template);
        let _ = writeln!(out, "updates_seen\t{}", self.updates_seen);
        let _ = writeln!(out, "epochs_trained\t{}", self.epochs_trained);
        let _ = writeln!(out, "features\t{}", self.keys.len());
        for (key, raw, avg) in self.weights() {
            let _ = writeln!(out, "{}\t{raw:?}\t{avg:?}", escape(key));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, StudentError> {
        // Leading `#` lines are provenance notes written by callers.
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .skip_while(|(_, l)| l.starts_with('#'));
        let (_, format) = lines.next().ok_or_else(|| corrupt(1, "empty file"))?;
        if format != MODEL_FORMAT {
            return Err(StudentError::VersionMismatch {
                found: format.to_string(),
                expected: MODEL_FORMAT.to_string(),
            });
        }
        let mut header = |name: &str| -> Result<(usize, String), StudentError> {
            let (no, line) = lines.next().ok_or_else(|| corrupt(0, "truncated header"))?;
            match line.split_once('\t') {
                Some((k, v)) if k == name => Ok((no, v.to_string())),
                _ => Err(corrupt(no, &format!("expected `{name}`"))),
            }
        };
        fn num<T: std::str::FromStr>((no, v): (usize, String)) -> Result<T, StudentError> {
            v.parse().map_err(|_| corrupt(no, &format!("bad number {v:?}")))
        }
        let seed = num(header("seed")?)?;
        let epochs = num(header("epochs")?)?;
        let shuffle = num(header("shuffle")?)?;
        let (_, template) = header("template")?;
        let updates_seen = num(header("updates_seen")?)?;
        let epochs_trained = num(header("epochs_trained")?)?;
        let count: usize = num(header("features")?)?;

        let mut model = StudentModel::new(
            seed,
            Hyperparams {
                epochs,
                shuffle,
                template,
            },
        );
        model.updates_seen = updates_seen;
        model.epochs_trained = epochs_trained;
        for (no, line) in lines {
            let mut parts = line.split('\t');
            let (Some(key), Some(raw), Some(avg), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(corrupt(no, "expected key, raw and averaged weight"));
            };
            let key = unescape(key);
            let raw: f64 = raw.parse().map_err(|_| corrupt(no, "bad raw weight"))?;
            let avg: f64 = avg.parse().map_err(|_| corrupt(no, "bad averaged weight"))?;
            let hash = hash_key(&key);
            if model.index.contains_key(&hash) {
                return Err(corrupt(no, "duplicate feature"));
            }
            let i = model.slot(hash, || key);
            model.raw[i] = raw;
            model.averaged[i] = avg;
        }
        if model.keys.len() != count {
            return Err(corrupt(0, &format!("expected {count} features, found {}", model.keys.len())));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), StudentError> {
        crate::io::write_atomic(path, self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, StudentError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Names for the hashed keys of one span; used when a feature is first
    /// touched during training.
    pub(crate) fn span_key_names(tokens: &[Token], start: usize, end: usize) -> [String; 7] {
        span_keys(tokens, start, end)
    }
}

fn corrupt(line: usize, reason: &str) -> StudentError {
    StudentError::CorruptModel {
        line,
        reason: reason.to_string(),
    }
}

fn escape(key: &str) -> String {
    key.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn unescape(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    let mut chars = key.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

impl PartialEq for StudentModel {
    fn eq(&self, other: &Self) -> bool {
        let bits = |m: &StudentModel| -> Vec<(String, u64, u64)> {
            m.weights()
                .into_iter()
                .map(|(k, r, a)| (k.to_string(), r.to_bits(), a.to_bits()))
                .collect()
        };
        self.updates_seen == other.updates_seen
            && self.epochs_trained == other.epochs_trained
            && self.seed == other.seed
            && self.hyperparams == other.hyperparams
            && bits(self) == bits(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::tokens_from_words;

    #[test]
    fn empty_sentence_errors() {
        let m = StudentModel::default();
        assert!(matches!(m.decode(&[]), Err(StudentError::EmptySentence)));
        assert!(matches!(m.decode_2best(&[]), Err(StudentError::EmptySentence)));
    }

    #[test]
    fn single_token_is_leaf() {
        let m = StudentModel::default();
        let t = m.decode(&tokens_from_words(&["a"])).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert!(t.root().is_leaf());
    }

    #[test]
    fn forced_trees_have_infinite_margin() {
        let m = StudentModel::default();
        let two = m.decode_2best(&tokens_from_words(&["a", "b"])).unwrap();
        assert!(two.second.is_none());
        assert_eq!(two.margin, f64::INFINITY);
        assert_eq!(m.confidence(&tokens_from_words(&["a", "b"])).unwrap(), f64::INFINITY);
        assert_eq!(m.confidence(&tokens_from_words(&["a"])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn zero_model_has_zero_margin() {
        let m = StudentModel::default();
        let toks = tokens_from_words(&["a", "b", "c"]);
        assert_eq!(m.decode_2best(&toks).unwrap().margin, 0.0);
        assert_eq!(m.confidence(&toks).unwrap(), 0.0);
    }

    #[test]
    fn scaling_scales_confidence_not_tree() {
        let toks = tokens_from_words(&["a", "b", "c", "d"]);
        let mut m = StudentModel::default();
        m.set_weight("v1:first=b", 1.5);
        m.set_weight("v1:len=2", -0.25);
        m.set_weight("v1:left+right=a|</s>", 0.75);
        let before = m.decode(&toks).unwrap();
        let c0 = m.confidence(&toks).unwrap();
        m.scale(4.0);
        assert_eq!(m.decode(&toks).unwrap(), before);
        assert_eq!(m.confidence(&toks).unwrap(), 4.0 * c0);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut m = StudentModel::new(
            99,
            Hyperparams {
                epochs: 3,
                shuffle: false,
                template: "v1".into(),
            },
        );
        m.set_weight("v1:first=a\tb", 0.1 + 0.2);
        m.set_weight("v1:last=\\", -1e-300);
        m.updates_seen = 17;
        m.epochs_trained = 3;
        let text = m.to_text();
        let back = StudentModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
        let noted = format!("# config_hash=abc\n{text}");
        assert_eq!(StudentModel::from_text(&noted).unwrap(), m);
    }

    #[test]
    fn rejects_other_versions_and_garbage() {
        assert!(matches!(
            StudentModel::from_text("pakd-model/0\n"),
            Err(StudentError::VersionMismatch { .. })
        ));
        let mut text = StudentModel::default().to_text();
        text.push_str("v1:x\tnotanumber\t0\n");
        assert!(matches!(StudentModel::from_text(&text), Err(StudentError::CorruptModel { .. })));
    }
}
