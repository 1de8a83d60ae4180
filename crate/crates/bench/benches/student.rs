use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use pakd_core::distill::{fit, LabelSource};
use pakd_core::experiment::{sample_pools, standard_grammar, CorpusConfig};
use pakd_core::student::SentenceFeatures;
use pakd_core::teachersim::AnnotatedExample;
use pakd_core::TrainConfig;

fn pool(n: usize, min_len: usize, max_len: usize) -> Vec<AnnotatedExample> {
    let corpus = CorpusConfig {
        labeled: n,
        unlabeled: 0,
        test: 0,
        min_len,
        max_len,
    };
    sample_pools(&standard_grammar(), &corpus, 1).expect("pool").labeled
}

fn decode(c: &mut Criterion) {
    let train = pool(300, 4, 12);
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let (model, _) = fit(&train, LabelSource::Gold, &[], &cfg, |_, _| {}).expect("training");
    let mut group = c.benchmark_group("decode");
    for len in [8, 16, 30] {
        let sentence = pool(1, len, len).remove(0);
        let feats = SentenceFeatures::new(&sentence.tokens);
        group.bench_with_input(BenchmarkId::new("best", len), &len, |b, _| {
            b.iter(|| model.decode_cached(black_box(&sentence.tokens), &feats))
        });
        group.bench_with_input(BenchmarkId::new("two_best", len), &len, |b, _| {
            b.iter(|| model.decode_2best_cached(black_box(&sentence.tokens), &feats))
        });
    }
    group.finish();
}

fn train_epoch(c: &mut Criterion) {
    let train = pool(1000, 4, 12);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.throughput(Throughput::Elements(train.len() as u64));
    group.bench_function("one_epoch_1000", |b| {
        b.iter(|| fit(black_box(&train), LabelSource::Gold, &[], &cfg, |_, _| {}).expect("training"))
    });
    group.finish();
}

criterion_group!(benches, decode, train_epoch);
criterion_main!(benches);
