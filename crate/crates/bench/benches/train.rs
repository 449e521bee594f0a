use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wltls::{train_all, ClassAssignment, TrainConfig, TrellisGraph};
use wltls_bench::small_corpus;

fn train_by_width(c: &mut Criterion) {
    let (train, _) = small_corpus(105);
    let config = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let mut group = c.benchmark_group("train_all");
    group.sample_size(10);
    for b in [2, 4, 10] {
        let g = TrellisGraph::new(train.num_classes(), b).unwrap();
        let a = ClassAssignment::random(g.num_classes(), 0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(b), &b, |bench, _| {
            bench.iter(|| black_box(train_all(&train, &g, &a, &config).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, train_by_width);
criterion_main!(benches);
