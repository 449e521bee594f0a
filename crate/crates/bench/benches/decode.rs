use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wltls::{edge_weights, ClassAssignment, CodeMatrix, Decoder, LossKind, TrellisGraph, WltlsModel};
use wltls_bench::{random_margins, small_corpus};

fn trellis_vs_exhaustive(c: &mut Criterion) {
    let mut group = c.benchmark_group("decode");
    for k in [1_000, 10_000] {
        let g = TrellisGraph::new(k, 2).unwrap();
        let a = ClassAssignment::random(k, 0).unwrap();
        let queries = random_margins(&g, 64, 1);
        let mut decoder = Decoder::new(&g, &a, LossKind::Exponential).unwrap();
        let mut i = 0;
        group.bench_with_input(BenchmarkId::new("trellis", k), &k, |bench, _| {
            bench.iter(|| {
                i = (i + 1) % queries.len();
                black_box(decoder.decode_margins(&queries[i]).unwrap().class_id)
            })
        });
        let matrix = CodeMatrix::new(&g, &a, k).unwrap();
        group.bench_with_input(BenchmarkId::new("exhaustive", k), &k, |bench, _| {
            bench.iter(|| {
                i = (i + 1) % queries.len();
                black_box(matrix.decode(&queries[i], LossKind::Exponential).unwrap().class_id)
            })
        });
    }
    group.finish();
}

fn weights_by_width(c: &mut Criterion) {
    let mut group = c.benchmark_group("edge_weights");
    let k = 10_000;
    for b in [2, 4, 10, 32, 100] {
        let g = TrellisGraph::new(k, b).unwrap();
        let f = random_margins(&g, 1, 2).pop().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(b), &b, |bench, _| {
            bench.iter(|| black_box(edge_weights(&g, &f, LossKind::Exponential).unwrap()))
        });
    }
    group.finish();
}

fn margins_and_predict(c: &mut Criterion) {
    let (train, test) = small_corpus(105);
    let mut group = c.benchmark_group("predict");
    for b in [2, 10] {
        let model = WltlsModel::train(&train, b, LossKind::Exponential, &Default::default()).unwrap();
        let pruned = model.prune(0.1).unwrap();
        let xs = test.samples();
        let mut i = 0;
        for (name, m) in [("dense", &model), ("pruned", &pruned)] {
            group.bench_function(BenchmarkId::new(name, b), |bench| {
                bench.iter(|| {
                    i = (i + 1) % xs.len();
                    black_box(m.predict(&xs[i].features, LossKind::Exponential).unwrap().class_id)
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, trellis_vs_exhaustive, weights_by_width, margins_and_predict);
criterion_main!(benches);
