use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pakd_core::distill::partition_by_scores;
use pakd_core::experiment::{build_corpora, standard_grammar, CorpusConfig};
use pakd_core::teachersim::NoiseConfig;
use pakd_core::treebank::{corpus_f1, SpanPolicy};

fn evaluation(c: &mut Criterion) {
    let corpus = CorpusConfig {
        labeled: 0,
        unlabeled: 5000,
        test: 0,
        ..CorpusConfig::default()
    };
    let corpora = build_corpora(&standard_grammar(), &corpus, &NoiseConfig::two_tier(0), 1).expect("corpora");
    let teacher: Vec<_> = corpora.train.iter().map(|e| e.teacher.clone().unwrap()).collect();
    let gold: Vec<_> = corpora.train.iter().map(|e| e.gold.clone().unwrap()).collect();
    c.bench_function("corpus_f1_5000", |b| {
        b.iter(|| corpus_f1(black_box(teacher.iter()), gold.iter(), SpanPolicy::default()).unwrap())
    });

    let ids: Vec<String> = (0..5000).map(|i| format!("u{i:05}")).collect();
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    // Coarse scores so the threshold has many ties, as convergence F1 does.
    let scores: Vec<f64> = (0..5000u64).map(|i| (i * 7919 % 23) as f64 / 22.0).collect();
    c.bench_function("partition_5000", |b| {
        b.iter(|| partition_by_scores(black_box(&refs), black_box(&scores), 50.0).unwrap())
    });
}

criterion_group!(benches, evaluation);
criterion_main!(benches);
