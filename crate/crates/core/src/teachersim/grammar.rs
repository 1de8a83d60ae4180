use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::treebank::{ConstituencyTree, Subtree, Token};

use super::{AnnotatedExample, TeacherSimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrammarConfig {
    pub nonterminals: usize,
    pub vocab_size: usize,
    /// Binary rules per nonterminal.
    pub rules_per_nonterminal: usize,
    /// Range the per-nonterminal probability of emitting a word is drawn from.
    pub emit_min: f64,
    pub emit_max: f64,
    /// Probability mass a nonterminal spends on words outside its own block.
    pub lexical_leak: f64,
    /// Zipf exponent within a word block.
    pub zipf: f64,
    pub seed: u64,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        GrammarConfig {
            nonterminals: 10,
            vocab_size: 600,
            rules_per_nonterminal: 3,
            emit_min: 0.35,
            emit_max: 0.6,
            lexical_leak: 0.1,
            zipf: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rhs {
    Binary(usize, usize),
    Emit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub rhs: Rhs,
    pub prob: f64,
}

/// A random PCFG in a binary normal form: every nonterminal either rewrites
/// to two nonterminals or emits a word. Nonterminal 0 is the start symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGrammar {
    pub vocab: Vec<String>,
    /// Rules per left-hand side; probabilities sum to one.
    pub rules: Vec<Vec<Rule>>,
    /// Word distribution used when a nonterminal emits; sums to one.
    pub emissions: Vec<Vec<(usize, f64)>>,
    pub seed: u64,
}

pub fn sample_grammar(config: &GrammarConfig) -> Result<SyntheticGrammar, TeacherSimError> {
    let n = config.nonterminals;
    if n < 2 {
        return Err(TeacherSimError::DegenerateConfig(format!("{n} nonterminals, need at least 2")));
    }
    if config.vocab_size < 10 {
        return Err(TeacherSimError::DegenerateConfig(format!(
            "{} terminals, need at least 10",
            config.vocab_size
        )));
    }
    if config.rules_per_nonterminal == 0 {
        return Err(TeacherSimError::DegenerateConfig("no binary rules".into()));
    }
    let emit_ok = 0.0 < config.emit_min && config.emit_min <= config.emit_max && config.emit_max < 1.0;
    if !emit_ok || !(0.0..1.0).contains(&config.lexical_leak) {
        return Err(TeacherSimError::DegenerateConfig("emission probabilities out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab: Vec<String> = (0..config.vocab_size).map(|i| format!("w{i}")).collect();

    let mut rules = Vec::with_capacity(n);
    for lhs in 0..n {
        // the start symbol always branches at least once so sentences are not trivially short
        let emit = if lhs == 0 {
            0.0
        } else {
            rng.gen_range(config.emit_min..=config.emit_max)
        };
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        while pairs.len() < config.rules_per_nonterminal.min((n - 1) * (n - 1)) {
            let pair = (rng.gen_range(1..n), rng.gen_range(1..n));
            if !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
        let raw: Vec<f64> = pairs.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut lhs_rules: Vec<Rule> = pairs
            .iter()
            .zip(&raw)
            .map(|(&(b, c), &w)| Rule {
                rhs: Rhs::Binary(b, c),
                prob: (1.0 - emit) * w / total,
            })
            .collect();
        if emit > 0.0 {
            lhs_rules.push(Rule {
                rhs: Rhs::Emit,
                prob: emit,
            });
        }
        rules.push(lhs_rules);
    }

    // Each nonterminal owns a contiguous block of the vocabulary.
    let block = config.vocab_size / n;
    let mut emissions = Vec::with_capacity(n);
    for lhs in 0..n {
        let lo = lhs * block;
        let hi = if lhs + 1 == n { config.vocab_size } else { lo + block };
        let mut weights = vec![0.0; config.vocab_size];
        let zipf_total: f64 = (1..=hi - lo).map(|r| (r as f64).powf(-config.zipf)).sum();
        for (rank, w) in weights[lo..hi].iter_mut().enumerate() {
            *w = (1.0 - config.lexical_leak) * ((rank + 1) as f64).powf(-config.zipf) / zipf_total;
        }
        let leak = config.lexical_leak / config.vocab_size as f64;
        weights.iter_mut().for_each(|w| *w += leak);
        let total: f64 = weights.iter().sum();
        emissions.push(weights.into_iter().enumerate().map(|(i, w)| (i, w / total)).collect());
    }

    Ok(SyntheticGrammar {
        vocab,
        rules,
        emissions,
        seed: config.seed,
    })
}

impl SyntheticGrammar {
    pub fn nonterminals(&self) -> usize {
        self.rules.len()
    }

    /// Largest deviation of any left-hand side's rule mass from one.
    pub fn normalization_error(&self) -> f64 {
        let rule_err = self
            .rules
            .iter()
            .map(|r| (r.iter().map(|x| x.prob).sum::<f64>() - 1.0).abs());
        let emit_err = self
            .emissions
            .iter()
            .map(|e| (e.iter().map(|x| x.1).sum::<f64>() - 1.0).abs());
        rule_err.chain(emit_err).fold(0.0, f64::max)
    }
}

struct Sampler<'g> {
    grammar: &'g SyntheticGrammar,
    rules: Vec<WeightedIndex<f64>>,
    words: Vec<WeightedIndex<f64>>,
}

impl<'g> Sampler<'g> {
    fn new(grammar: &'g SyntheticGrammar) -> Self {
        let rules = grammar
            .rules
            .iter()
            .map(|r| WeightedIndex::new(r.iter().map(|x| x.prob)).expect("normalized rules"))
            .collect();
        let words = grammar
            .emissions
            .iter()
            .map(|e| WeightedIndex::new(e.iter().map(|x| x.1)).expect("normalized emissions"))
            .collect();
        Sampler { grammar, rules, words }
    }

    /// Samples one derivation; gives up once it exceeds `max_len` leaves.
    fn sample(&self, rng: &mut ChaCha8Rng, max_len: usize) -> Option<(Vec<Token>, Subtree)> {
        let mut tokens = Vec::new();
        let sub = self.expand(0, rng, &mut tokens, max_len)?;
        Some((tokens, sub))
    }

    fn expand(&self, lhs: usize, rng: &mut ChaCha8Rng, tokens: &mut Vec<Token>, max_len: usize) -> Option<Subtree> {
        if tokens.len() >= max_len {
            return None;
        }
        let g = self.grammar;
        match g.rules[lhs][self.rules[lhs].sample(rng)].rhs {
            Rhs::Emit => {
                let word = g.emissions[lhs][self.words[lhs].sample(rng)].0;
                let index = tokens.len();
                tokens.push(Token {
                    index,
                    surface: g.vocab[word].clone(),
                    tag: Some(format!("N{lhs}")),
                });
                Some(Subtree::Leaf(index))
            }
            Rhs::Binary(b, c) => {
                let left = self.expand(b, rng, tokens, max_len)?;
                let right = self.expand(c, rng, tokens, max_len)?;
                Some(Subtree::Node {
                    label: Some(format!("N{lhs}")),
                    children: vec![left, right],
                })
            }
        }
    }
}

/// Draws `count` sentences with lengths in `min_len..=max_len` by rejection.
/// Each example's gold tree is its derivation. Ids are `{prefix}{index}`,
/// zero-padded so that string order equals corpus order.
pub fn sample_corpus(
    grammar: &SyntheticGrammar,
    count: usize,
    (min_len, max_len): (usize, usize),
    seed: u64,
    id_prefix: &str,
) -> Result<Vec<AnnotatedExample>, TeacherSimError> {
    if count == 0 || min_len == 0 || min_len > max_len {
        return Err(TeacherSimError::LengthBoundsInfeasible { min_len, max_len });
    }
    let sampler = Sampler::new(grammar);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = 2000usize.max(count * 200);
    let mut attempts = 0usize;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        attempts += 1;
        if attempts > cap {
            return Err(TeacherSimError::LengthBoundsInfeasible { min_len, max_len });
        }
        let Some((tokens, sub)) = sampler.sample(&mut rng, max_len + 1) else {
            continue;
        };
        if tokens.len() < min_len || tokens.len() > max_len {
            continue;
        }
        let gold = ConstituencyTree::from_subtree(tokens.clone(), &sub);
        out.push(AnnotatedExample {
            id: format!("{id_prefix}{:06}", out.len()),
            tokens,
            gold: Some(gold),
            teacher: None,
            noise_tier: None,
            student: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_grammar() {
        let cfg = GrammarConfig::default();
        assert_eq!(sample_grammar(&cfg).unwrap(), sample_grammar(&cfg).unwrap());
        let other = GrammarConfig { seed: 8, ..cfg.clone() };
        assert_ne!(sample_grammar(&cfg).unwrap(), sample_grammar(&other).unwrap());
    }

    #[test]
    fn rejects_degenerate_configs() {
        let one = GrammarConfig {
            nonterminals: 1,
            ..Default::default()
        };
        assert!(matches!(sample_grammar(&one), Err(TeacherSimError::DegenerateConfig(_))));
        let tiny_vocab = GrammarConfig {
            vocab_size: 9,
            ..Default::default()
        };
        assert!(sample_grammar(&tiny_vocab).is_err());
    }

    #[test]
    fn rules_normalize() {
        for seed in 0..20 {
            let g = sample_grammar(&GrammarConfig {
                seed,
                ..Default::default()
            })
            .unwrap();
            assert!(g.normalization_error() < 1e-9);
        }
    }

    #[test]
    fn corpus_respects_bounds_and_gold_matches_tokens() {
        let g = sample_grammar(&GrammarConfig::default()).unwrap();
        let corpus = sample_corpus(&g, 200, (4, 12), 1, "s").unwrap();
        assert_eq!(corpus.len(), 200);
        for ex in &corpus {
            assert!((4..=12).contains(&ex.tokens.len()));
            let gold = ex.gold.as_ref().unwrap();
            assert!(gold.validate());
            assert!(gold.is_binary());
            assert_eq!(gold.tokens(), ex.tokens.as_slice());
        }
        assert_eq!(corpus[0].id, "s000000");
    }

    #[test]
    fn corpus_is_deterministic() {
        let g = sample_grammar(&GrammarConfig::default()).unwrap();
        let a = sample_corpus(&g, 50, (3, 10), 9, "s").unwrap();
        let b = sample_corpus(&g, 50, (3, 10), 9, "s").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn impossible_bounds_fail() {
        let g = sample_grammar(&GrammarConfig::default()).unwrap();
        assert!(matches!(
            sample_corpus(&g, 5, (10, 3), 0, "s"),
            Err(TeacherSimError::LengthBoundsInfeasible { .. })
        ));
        // the start symbol always branches, so one-token sentences never occur
        assert!(matches!(
            sample_corpus(&g, 1, (1, 1), 0, "s"),
            Err(TeacherSimError::LengthBoundsInfeasible { .. })
        ));
    }
}
