use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::treebank::{ConstituencyTree, Subtree};

use super::{AnnotatedExample, TeacherSimError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Re-bracket adjacent sibling pairs; structured, local noise.
    #[default]
    Rotation,
    /// Replace the whole tree with a uniformly random one.
    RandomReplacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTier {
    pub weight: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub tiers: Vec<NoiseTier>,
    #[serde(default)]
    pub mode: NoiseMode,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseConfig {
    /// Half clean, half heavily rotated.
    pub fn two_tier(seed: u64) -> Self {
        NoiseConfig {
            tiers: vec![
                NoiseTier { weight: 0.5, eta: 0.0 },
                NoiseTier { weight: 0.5, eta: 0.6 },
            ],
            mode: NoiseMode::Rotation,
            seed,
        }
    }

    pub fn clean(seed: u64) -> Self {
        NoiseConfig {
            tiers: vec![NoiseTier { weight: 1.0, eta: 0.0 }],
            mode: NoiseMode::Rotation,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TeacherSimError> {
        if self.tiers.is_empty() {
            return Err(TeacherSimError::InvalidNoise("no tiers".into()));
        }
        let total: f64 = self.tiers.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > 1e-9 || self.tiers.iter().any(|t| t.weight < 0.0) {
            return Err(TeacherSimError::InvalidNoise(format!("tier weights sum to {total}")));
        }
        if let Some(t) = self.tiers.iter().find(|t| !(0.0..=1.0).contains(&t.eta)) {
            return Err(TeacherSimError::InvalidNoise(format!("eta {} outside [0, 1]", t.eta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Bin {
    Leaf(usize),
    Node(Box<Bin>, Box<Bin>),
}

impl Bin {
    fn from_subtree(sub: Subtree) -> Bin {
        match sub {
            Subtree::Leaf(i) => Bin::Leaf(i),
            Subtree::Node { children, .. } => {
                let mut it = children.into_iter();
                let (l, r) = (it.next().unwrap(), it.next().unwrap());
                Bin::Node(Box::new(Bin::from_subtree(l)), Box::new(Bin::from_subtree(r)))
            }
        }
    }

    fn into_subtree(self) -> Subtree {
        match self {
            Bin::Leaf(i) => Subtree::Leaf(i),
            Bin::Node(l, r) => Subtree::binary(l.into_subtree(), r.into_subtree()),
        }
    }

    fn is_node(&self) -> bool {
        matches!(self, Bin::Node(..))
    }

    /// Rotations available at each internal node, preorder:
    /// (can rotate right, can rotate left).
    fn rotation_sites(&self, out: &mut Vec<(bool, bool)>) {
        if let Bin::Node(l, r) = self {
            out.push((l.is_node(), r.is_node()));
            l.rotation_sites(out);
            r.rotation_sites(out);
        }
    }

    // Applies the rotation at preorder internal-node index `target`.
    fn rotate(&mut self, target: usize, counter: &mut usize, rightward: bool) -> bool {
        let Bin::Node(..) = self else { return false };
        if *counter == target {
            let old = std::mem::replace(self, Bin::Leaf(0));
            *self = match (old, rightward) {
                // ((a b) c) -> (a (b c))
                (Bin::Node(l, c), true) => match *l {
                    Bin::Node(a, b) => Bin::Node(a, Box::new(Bin::Node(b, c))),
                    leaf => Bin::Node(Box::new(leaf), c),
                },
                // (a (b c)) -> ((a b) c)
                (Bin::Node(a, r), false) => match *r {
                    Bin::Node(b, c) => Bin::Node(Box::new(Bin::Node(a, b)), c),
                    leaf => Bin::Node(a, Box::new(leaf)),
                },
                (leaf, _) => leaf,
            };
            return true;
        }
        *counter += 1;
        let Bin::Node(l, r) = self else { unreachable!() };
        l.rotate(target, counter, rightward) || r.rotate(target, counter, rightward)
    }
}

fn catalan_table(n: usize) -> Vec<f64> {
    let mut c = vec![1.0f64; n.max(1)];
    for i in 1..c.len() {
        c[i] = c[i - 1] * 2.0 * (2 * i - 1) as f64 / (i + 1) as f64;
    }
    c
}

fn random_tree<R: Rng + ?Sized>(start: usize, end: usize, catalan: &[f64], rng: &mut R) -> Bin {
    let n = end - start;
    if n == 1 {
        return Bin::Leaf(start);
    }
    // number of trees with `left` leaves on the left: C(left-1) * C(n-left-1)
    let weights: Vec<f64> = (1..n).map(|left| catalan[left - 1] * catalan[n - left - 1]).collect();
    let left = 1 + WeightedIndex::new(&weights).unwrap().sample(rng);
    Bin::Node(
        Box::new(random_tree(start, start + left, catalan, rng)),
        Box::new(random_tree(start + left, end, catalan, rng)),
    )
}

/// A uniformly random binary bracketing over the tree's tokens.
pub fn random_binary_tree<R: Rng + ?Sized>(tree: &ConstituencyTree, rng: &mut R) -> ConstituencyTree {
    let n = tree.len();
    let catalan = catalan_table(n);
    let bin = random_tree(0, n, &catalan, rng);
    ConstituencyTree::from_subtree(tree.tokens().to_vec(), &bin.into_subtree())
}

/// Number of rotations applied at noise level `eta` to an `n`-token tree.
pub fn rotation_count(eta: f64, n: usize) -> usize {
    (eta * n.saturating_sub(2) as f64).round() as usize
}

/// Simulates teacher noise on a tree. Non-binary input is binarized first;
/// the result is always a binary tree over the same tokens.
pub fn corrupt<R: Rng + ?Sized>(tree: &ConstituencyTree, eta: f64, mode: NoiseMode, rng: &mut R) -> ConstituencyTree {
    let binary = if tree.is_binary() { tree.clone() } else { tree.binarize() };
    if eta <= 0.0 {
        return binary;
    }
    match mode {
        NoiseMode::RandomReplacement => {
            if rng.gen_bool(eta.min(1.0)) {
                random_binary_tree(&binary, rng)
            } else {
                binary
            }
        }
        NoiseMode::Rotation => {
            let rotations = rotation_count(eta, binary.len());
            if rotations == 0 {
                return binary;
            }
            let mut bin = Bin::from_subtree(binary.to_subtree());
            let mut sites = Vec::new();
            for _ in 0..rotations {
                sites.clear();
                bin.rotation_sites(&mut sites);
                let open: Vec<usize> = (0..sites.len()).filter(|&i| sites[i].0 || sites[i].1).collect();
                if open.is_empty() {
                    break;
                }
                let at = open[rng.gen_range(0..open.len())];
                let rightward = match sites[at] {
                    (true, true) => rng.gen_bool(0.5),
                    (right, _) => right,
                };
                bin.rotate(at, &mut 0, rightward);
            }
            ConstituencyTree::from_subtree(binary.tokens().to_vec(), &bin.into_subtree())
        }
    }
}

/// Assigns every example a noise tier by weighted draw and corrupts its gold
/// tree accordingly.
pub fn make_teacher_labels(
    corpus: &[AnnotatedExample],
    noise: &NoiseConfig,
) -> Result<Vec<AnnotatedExample>, TeacherSimError> {
    use rand::SeedableRng;
    noise.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(noise.seed);
    let tiers = WeightedIndex::new(noise.tiers.iter().map(|t| t.weight))
        .map_err(|e| TeacherSimError::InvalidNoise(e.to_string()))?;
    corpus
        .iter()
        .map(|ex| {
            let gold = ex
                .gold
                .as_ref()
                .ok_or_else(|| TeacherSimError::MissingGold(ex.id.clone()))?;
            let tier = tiers.sample(&mut rng);
            let teacher = corrupt(gold, noise.tiers[tier].eta, noise.mode, &mut rng);
            Ok(AnnotatedExample {
                teacher: Some(teacher),
                noise_tier: Some(tier),
                ..ex.clone()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{parse_bracketed, unlabeled_f1, SpanPolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn right_branching(n: usize) -> ConstituencyTree {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let spans: Vec<(usize, usize)> = (1..n - 1).map(|s| (s, n)).collect();
        ConstituencyTree::from_spans(crate::treebank::tokens_from_words(&words), &spans).unwrap()
    }

    #[test]
    fn zero_eta_is_identity() {
        let t = parse_bracketed("(S (A a b) (B c (C d e)))").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [NoiseMode::Rotation, NoiseMode::RandomReplacement] {
            assert_eq!(corrupt(&t, 0.0, mode, &mut rng), t);
        }
    }

    #[test]
    fn two_token_tree_cannot_change() {
        let t = parse_bracketed("(S a b)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = corrupt(&t, 1.0, NoiseMode::RandomReplacement, &mut rng);
        assert!(out.structurally_eq(&t));
    }

    #[test]
    fn rotation_count_formula() {
        assert_eq!(rotation_count(0.5, 10), 4);
        assert_eq!(rotation_count(0.6, 10), 5);
        assert_eq!(rotation_count(1.0, 2), 0);
        assert_eq!(rotation_count(1.0, 1), 0);
    }

    #[test]
    fn single_rotation_changes_one_span() {
        let t = right_branching(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // eta * (n - 2) = 1/3 * 3 = 1 rotation
        let out = corrupt(&t, 1.0 / 3.0, NoiseMode::Rotation, &mut rng);
        let before = crate::treebank::eval_spans(&t, SpanPolicy::default());
        let after = crate::treebank::eval_spans(&out, SpanPolicy::default());
        assert_eq!(before.len(), after.len());
        assert_eq!(before.intersection_len(&after), before.len() - 1);
    }

    #[test]
    fn random_trees_cover_all_shapes() {
        // 5 binary trees over 4 tokens; each should appear with frequency near 1/5
        let t = right_branching(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..5000 {
            *counts.entry(random_binary_tree(&t, &mut rng).spans()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 5);
        for &c in counts.values() {
            assert!((900..1100).contains(&c), "{c}");
        }
    }

    #[test]
    fn teacher_labels_with_clean_tier_match_gold() {
        let gold = right_branching(6);
        let corpus: Vec<AnnotatedExample> = (0..20).map(|i| AnnotatedExample::with_gold(format!("e{i}"), gold.clone())).collect();
        let out = make_teacher_labels(&corpus, &NoiseConfig::clean(4)).unwrap();
        for ex in out {
            let f1 = unlabeled_f1(ex.teacher.as_ref().unwrap(), &gold, SpanPolicy::default()).unwrap();
            assert_eq!(f1, 1.0);
            assert_eq!(ex.noise_tier, Some(0));
        }
    }

    #[test]
    fn missing_gold_is_an_error() {
        let ex = AnnotatedExample {
            gold: None,
            ..AnnotatedExample::with_gold("e".into(), right_branching(3))
        };
        assert!(matches!(
            make_teacher_labels(&[ex], &NoiseConfig::clean(0)),
            Err(TeacherSimError::MissingGold(_))
        ));
    }

    #[test]
    fn invalid_noise_configs() {
        let mut cfg = NoiseConfig::two_tier(0);
        cfg.tiers[0].weight = 0.7;
        assert!(cfg.validate().is_err());
        let mut cfg = NoiseConfig::two_tier(0);
        cfg.tiers[1].eta = 1.5;
        assert!(cfg.validate().is_err());
    }
}
