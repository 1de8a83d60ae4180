use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::treebank::{eval_spans, span_prf, ConstituencyTree, SpanPolicy, SpanSet, Subtree, Token};

use super::chart;
use super::features::SentenceFeatures;
use super::model::{Hyperparams, StudentModel, Weights};
use super::StudentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    /// Number of times each labeled example joins every epoch's stream.
    pub beta: f64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            seed: 0,
            beta: 0.0,
            shuffle: true,
        }
    }
}

/// One training sentence with its target reduced to unlabeled spans.
#[derive(Debug, Clone)]
pub struct TrainItem<'a> {
    pub id: &'a str,
    pub tokens: &'a [Token],
    pub features: &'a SentenceFeatures,
    pub target: SpanSet,
}

impl<'a> TrainItem<'a> {
    pub fn new(
        id: &'a str,
        tokens: &'a [Token],
        features: &'a SentenceFeatures,
        target: &ConstituencyTree,
    ) -> Result<Self, StudentError> {
        if target.len() != tokens.len() {
            return Err(StudentError::TargetMismatch {
                tokens: tokens.len(),
                target: target.len(),
            });
        }
        let target = if target.is_binary() {
            eval_spans(target, SpanPolicy::default())
        } else {
            eval_spans(&target.binarize(), SpanPolicy::default())
        };
        Ok(TrainItem {
            id,
            tokens,
            features,
            target,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub example_id: String,
    pub epoch: usize,
    pub f1_vs_target: f64,
}

/// F1 of the online prediction (raw weights, before the update) against the
/// training label, for every example visit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("example_id,epoch,f1_vs_target\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{}", r.example_id, r.epoch, r.f1_vs_target);
        }
        out
    }

    pub fn epoch_mean(&self, epoch: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.epoch == epoch)
            .map(|r| r.f1_vs_target)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub(crate) fn subtree_spans(sub: &Subtree, n: usize) -> SpanSet {
    fn walk(sub: &Subtree, out: &mut Vec<(usize, usize)>) -> (usize, usize) {
        match sub {
            Subtree::Leaf(i) => (*i, i + 1),
            Subtree::Node { children, .. } => {
                let start = walk(&children[0], out).0;
                let mut end = start;
                for c in children {
                    end = walk(c, out).1;
                }
                if end - start >= 2 {
                    out.push((start, end));
                }
                (start, end)
            }
        }
    }
    let mut spans = Vec::with_capacity(n);
    walk(sub, &mut spans);
    spans.retain(|&s| s != (0, n));
    SpanSet::from_spans(spans)
}

fn check_beta(beta: f64) -> Result<usize, StudentError> {
    if beta < 0.0 || beta.fract() != 0.0 || !beta.is_finite() {
        return Err(StudentError::NonIntegerBeta(beta));
    }
    Ok(beta as usize)
}

struct Trainer {
    model: StudentModel,
    // sum over updates of (step - 1) * delta, for exact averaging
    acc: Vec<f64>,
    steps: u64,
}

impl Trainer {
    fn bump(&mut self, item: &TrainItem<'_>, span: (usize, usize), delta: f64) {
        let hashes = item.features.span(span.0, span.1);
        let mut names: Option<[String; 7]> = None;
        for (slot_no, &h) in hashes.iter().enumerate() {
            let i = match self.model.index_of(h) {
                Some(i) => i,
                None => {
                    let names = names.get_or_insert_with(|| {
                        StudentModel::span_key_names(item.tokens, span.0, span.1)
                    });
                    let name = std::mem::take(&mut names[slot_no]);
                    let i = self.model.slot(h, || name);
                    self.acc.push(0.0);
                    i
                }
            };
            self.model.raw_mut()[i] += delta;
            self.acc[i] += (self.steps - 1) as f64 * delta;
        }
    }

    fn step(&mut self, item: &TrainItem<'_>) -> f64 {
        self.steps += 1;
        let n = item.tokens.len();
        let scores = self.model.span_scores(item.features, Weights::Raw);
        let (_, sub) = chart::best_tree(&scores);
        let predicted = subtree_spans(&sub, n);
        let f1 = span_prf(&predicted, &item.target).f1;
        if predicted != item.target {
            for span in item.target.iter().filter(|s| !predicted.contains(*s)) {
                self.bump(item, span, 1.0);
            }
            for span in predicted.iter().filter(|s| !item.target.contains(*s)) {
                self.bump(item, span, -1.0);
            }
        }
        f1
    }

    fn refresh_average(&mut self) {
        let raw = self.model.raw();
        let avg = if self.steps == 0 {
            raw.to_vec()
        } else {
            let t = self.steps as f64;
            raw.iter().zip(&self.acc).map(|(w, a)| w - a / t).collect()
        };
        self.model.set_averaged(avg);
        self.model.updates_seen = self.steps;
    }
}

/// Averaged structured-perceptron training over prepared items.
///
/// `on_epoch` sees the model with its averaged weights refreshed after every
/// epoch (1-based).
pub fn train_items(
    items: &[TrainItem<'_>],
    labeled: &[TrainItem<'_>],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &StudentModel),
) -> Result<(StudentModel, TrainTrace), StudentError> {
    let replicas = check_beta(config.beta)?;
    if items.is_empty() && (replicas == 0 || labeled.is_empty()) {
        return Err(StudentError::EmptyTrainingSet);
    }
    let mut stream: Vec<&TrainItem<'_>> = items.iter().collect();
    for _ in 0..replicas {
        stream.extend(labeled.iter());
    }
    let mut trainer = Trainer {
        model: StudentModel::new(
            config.seed,
            Hyperparams {
                epochs: config.epochs,
                shuffle: config.shuffle,
                ..Hyperparams::default()
            },
        ),
        acc: Vec::new(),
        steps: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = TrainTrace::default();
    for epoch in 1..=config.epochs {
        if config.shuffle {
            stream.shuffle(&mut rng);
        }
        for item in &stream {
            let f1 = trainer.step(item);
            trace.records.push(TrainRecord {
                example_id: item.id.to_string(),
                epoch,
                f1_vs_target: f1,
            });
        }
        trainer.refresh_average();
        trainer.model.epochs_trained = epoch;
        on_epoch(epoch, &trainer.model);
    }
    trainer.refresh_average();
    Ok((trainer.model, trace))
}

/// Trains on `(tokens, target)` pairs; `labeled` pairs are mixed into every
/// epoch `config.beta` times. Example ids are their positions.
pub fn train(
    examples: &[(Vec<Token>, ConstituencyTree)],
    labeled: &[(Vec<Token>, ConstituencyTree)],
    config: &TrainConfig,
) -> Result<(StudentModel, TrainTrace), StudentError> {
    let ids: Vec<String> = (0..examples.len() + labeled.len()).map(|i| i.to_string()).collect();
    let feats: Vec<SentenceFeatures> = examples
        .iter()
        .chain(labeled)
        .map(|(t, _)| SentenceFeatures::new(t))
        .collect();
    let mut prepared = Vec::with_capacity(ids.len());
    for (i, (tokens, target)) in examples.iter().chain(labeled).enumerate() {
        prepared.push(TrainItem::new(&ids[i], tokens, &feats[i], target)?);
    }
    let labeled_items = prepared.split_off(examples.len());
    train_items(&prepared, &labeled_items, config, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{parse_bracketed, unlabeled_f1};

    fn pair(s: &str) -> (Vec<Token>, ConstituencyTree) {
        let t = parse_bracketed(s).unwrap();
        (t.tokens().to_vec(), t)
    }

    #[test]
    fn fits_single_example() {
        let ex = pair("(S (A a b) (B (C c d) e))");
        let cfg = TrainConfig {
            epochs: 5,
            ..Default::default()
        };
        let (model, trace) = train(std::slice::from_ref(&ex), &[], &cfg).unwrap();
        let pred = model.decode(&ex.0).unwrap();
        assert_eq!(unlabeled_f1(&pred, &ex.1.binarize(), SpanPolicy::default()).unwrap(), 1.0);
        assert_eq!(trace.records.len(), 5);
        assert_eq!(model.epochs_trained, 5);
        assert_eq!(model.updates_seen, 5);
    }

    #[test]
    fn zero_epochs_gives_zero_model() {
        let ex = pair("(S a (B b c))");
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let (model, trace) = train(std::slice::from_ref(&ex), &[], &cfg).unwrap();
        assert_eq!(model.num_features(), 0);
        assert!(trace.records.is_empty());
        let a = model.decode(&ex.0).unwrap();
        let b = StudentModel::default().decode(&ex.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_consistent_examples() {
        let a = pair("(S (A x y) (B z w))");
        let b = pair("(S (A p q) (B (C r s) t))");
        let cfg = TrainConfig {
            epochs: 10,
            seed: 3,
            ..Default::default()
        };
        let (model, _) = train(&[a.clone(), b.clone()], &[], &cfg).unwrap();
        for (toks, gold) in [a, b] {
            let pred = model.decode(&toks).unwrap();
            assert_eq!(unlabeled_f1(&pred, &gold, SpanPolicy::default()).unwrap(), 1.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let data = vec![
            pair("(S (A a b) (B c d))"),
            pair("(S a (B b (C c d)))"),
            pair("(S (A (C a b) c) d)"),
        ];
        let cfg = TrainConfig {
            epochs: 4,
            seed: 11,
            ..Default::default()
        };
        let (m1, t1) = train(&data, &[], &cfg).unwrap();
        let (m2, t2) = train(&data, &[], &cfg).unwrap();
        assert_eq!(m1.to_text(), m2.to_text());
        assert_eq!(t1, t2);
    }

    #[test]
    fn beta_replicates_labeled_examples() {
        let data = vec![pair("(S (A a b) c)")];
        let gold = vec![pair("(S x (B y z))")];
        let cfg = TrainConfig {
            epochs: 2,
            beta: 3.0,
            ..Default::default()
        };
        let (_, trace) = train(&data, &gold, &cfg).unwrap();
        assert_eq!(trace.records.len(), 2 * (1 + 3));
        let bad = TrainConfig {
            beta: 0.5,
            ..Default::default()
        };
        assert!(matches!(train(&data, &gold, &bad), Err(StudentError::NonIntegerBeta(_))));
    }

    #[test]
    fn empty_training_set() {
        assert!(matches!(
            train(&[], &[], &TrainConfig::default()),
            Err(StudentError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn correct_prediction_means_no_update() {
        // a 2-token sentence has no eval spans, so it can never trigger an update
        let data = vec![pair("(S a b)")];
        let (model, _) = train(&data, &[], &TrainConfig::default()).unwrap();
        assert_eq!(model.num_features(), 0);
    }
}
