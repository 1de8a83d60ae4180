mod common;

use pakd_core::treebank::{eval_spans, parse_bracketed, serialize_bracketed, span_prf, unlabeled_f1, SpanPolicy};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn bracketed_round_trip(t in common::tree(14)) {
        let text = serialize_bracketed(&t);
        let back = parse_bracketed(&text).unwrap();
        prop_assert!(back.structurally_eq(&t));
        prop_assert_eq!(serialize_bracketed(&back), text);
    }

    #[test]
    fn precision_and_recall_swap((a, b) in common::tree_pair(12)) {
        for policy in [SpanPolicy::default(), SpanPolicy::INCLUDE_ROOT] {
            let (sa, sb) = (eval_spans(&a, policy), eval_spans(&b, policy));
            let ab = span_prf(&sa, &sb);
            let ba = span_prf(&sb, &sa);
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert_eq!(ab.recall, ba.precision);
            prop_assert_eq!(ab.f1, ba.f1);
        }
    }

    #[test]
    fn f1_is_bounded_and_one_only_on_equal_sets((a, b) in common::tree_pair(12)) {
        let f = unlabeled_f1(&a, &b, SpanPolicy::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        let equal = eval_spans(&a, SpanPolicy::default()) == eval_spans(&b, SpanPolicy::default());
        prop_assert_eq!(f == 1.0, equal);
        prop_assert_eq!(unlabeled_f1(&a, &a, SpanPolicy::default()).unwrap(), 1.0);
    }

    #[test]
    fn binarization_keeps_every_original_span(t in common::tree(14)) {
        let b = t.binarize();
        prop_assert!(b.is_binary());
        prop_assert_eq!(b.words(), t.words());
        let original = eval_spans(&t, SpanPolicy::INCLUDE_ROOT);
        let prf = span_prf(&eval_spans(&b, SpanPolicy::INCLUDE_ROOT), &original);
        prop_assert_eq!(prf.recall, 1.0);
    }

    #[test]
    fn eval_spans_skip_single_tokens(t in common::tree(14)) {
        for policy in [SpanPolicy::default(), SpanPolicy::INCLUDE_ROOT] {
            prop_assert!(eval_spans(&t, policy).iter().all(|(s, e)| e - s >= 2));
        }
    }
}
