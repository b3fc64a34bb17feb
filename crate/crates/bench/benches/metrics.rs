use criterion::{criterion_group, criterion_main, Criterion};
use fdclust::metrics::agreement;
use fdclust::Partition;

fn agreement_large(c: &mut Criterion) {
    let n = 5000;
    let truth = Partition::from_labels((0..n).map(|i| i % 7));
    let estimate = Partition::from_labels((0..n).map(|i| (i * 31 / 11) % 13));
    c.bench_function("agreement/5000", |b| b.iter(|| agreement(&truth, &estimate).unwrap()));
}

criterion_group!(benches, agreement_large);
criterion_main!(benches);
