mod common;

use pakd_core::student::extract_features;
use pakd_core::StudentModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A model with a random weight on every feature of every span of `tokens`.
/// Weights are drawn from a few levels so ties occur.
fn random_model(tree: &pakd_core::ConstituencyTree, seed: u64) -> StudentModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = StudentModel::default();
    let n = tree.len();
    for s in 0..n {
        for e in s + 2..=n {
            for (key, _) in extract_features(tree.tokens(), (s, e)).unwrap().iter() {
                model.set_weight(key, rng.gen_range(-3..=3) as f64 * 0.5);
            }
        }
    }
    model
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn positive_rescaling_keeps_the_argmax(t in common::tree(10), seed in any::<u64>(), power in -8..=8i32) {
        // Powers of two scale exactly, so tied trees stay tied.
        let factor = 2f64.powi(power);
        let mut model = random_model(&t, seed);
        let before = model.decode(t.tokens()).unwrap();
        model.scale(factor);
        prop_assert_eq!(model.decode(t.tokens()).unwrap(), before);
    }

    #[test]
    fn margin_is_nonnegative_and_zero_only_on_ties(t in common::tree(9), seed in any::<u64>()) {
        let model = random_model(&t, seed);
        let two = model.decode_2best(t.tokens()).unwrap();
        prop_assert!(two.margin >= 0.0);
        match &two.second {
            None => prop_assert!(two.margin.is_infinite()),
            Some(second) => {
                prop_assert!(!second.structurally_eq(&two.best));
                if two.margin == 0.0 {
                    prop_assert_eq!(model.tree_score(second), model.tree_score(&two.best));
                }
            }
        }
        prop_assert!(model.confidence(t.tokens()).unwrap() >= 0.0);
    }
}
