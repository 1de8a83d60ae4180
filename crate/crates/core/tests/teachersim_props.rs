mod common;

use pakd_core::teachersim::{corrupt, parse_jsonl, write_jsonl, AnnotatedExample, NoiseMode};
use pakd_core::treebank::{unlabeled_f1, SpanPolicy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn corruption_keeps_tokens_and_binary_shape(
        t in common::tree(16),
        eta in 0.0..=1.0f64,
        random in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mode = if random { NoiseMode::RandomReplacement } else { NoiseMode::Rotation };
        let out = corrupt(&t, eta, mode, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(out.validate());
        prop_assert!(out.is_binary());
        prop_assert_eq!(out.tokens(), t.tokens());
    }

    #[test]
    fn jsonl_round_trip(t in common::tree(12), teacher_seed in any::<u64>(), tier in proptest::option::of(0usize..3)) {
        let mut ex = AnnotatedExample::with_gold("s1".into(), t.clone());
        ex.teacher = Some(common::binary_tree(t.len(), teacher_seed).with_tokens(t.tokens().to_vec()).unwrap());
        ex.noise_tier = tier;
        let header = serde_json::json!({"data_hash": "abc"});
        let mut bytes = Vec::new();
        write_jsonl(&mut bytes, Some(&header), std::slice::from_ref(&ex)).unwrap();
        let back = parse_jsonl(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.header, Some(header));
        prop_assert_eq!(back.examples.len(), 1);
        let got = &back.examples[0];
        prop_assert!(got.gold.as_ref().unwrap().structurally_eq(&t));
        prop_assert!(got.teacher.as_ref().unwrap().structurally_eq(ex.teacher.as_ref().unwrap()));
        prop_assert_eq!(got.noise_tier, tier);
    }
}

/// Mean gold F1 of corrupted trees must not rise with eta. Every grid point
/// corrupts the same 600 binary trees with independent draws.
#[test]
fn degradation_is_monotone_in_eta() {
    const TREES: u64 = 600;
    let gold: Vec<_> = (0..TREES).map(|i| common::binary_tree(4 + (i % 12) as usize, i)).collect();
    for mode in [NoiseMode::Rotation, NoiseMode::RandomReplacement] {
        let means: Vec<f64> = [0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0]
            .iter()
            .map(|&eta| {
                let mut rng = ChaCha8Rng::seed_from_u64(99);
                let total: f64 = gold
                    .iter()
                    .map(|g| unlabeled_f1(&corrupt(g, eta, mode, &mut rng), g, SpanPolicy::default()).unwrap())
                    .sum();
                total / TREES as f64
            })
            .collect();
        assert_eq!(means[0], 1.0, "{mode:?}");
        for w in means.windows(2) {
            assert!(w[1] <= w[0], "{mode:?}: {means:?}");
        }
    }
}
