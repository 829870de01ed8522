use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fkl_core::estimators::{fit_fkl_pcb_linear, fit_fkl_pcb_tabular, LinearPcbConfig};
use fkl_core::harness::{random_linear, random_tabular};
use fkl_core::{sample_dataset, Noise};
use std::hint::black_box;

fn sampling(c: &mut Criterion) {
    let inst = random_tabular(5, 10, 0, Noise::Bernoulli).unwrap();
    c.bench_function("sample_dataset_65536", |b| b.iter(|| sample_dataset(black_box(&inst), 1 << 16, 1)));
}

fn tabular(c: &mut Criterion) {
    let inst = random_tabular(5, 10, 0, Noise::Bernoulli).unwrap();
    let mut group = c.benchmark_group("fkl_pcb_tabular");
    for n in [1usize << 10, 1 << 16] {
        let data = sample_dataset(&inst, n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, data| {
            b.iter(|| fit_fkl_pcb_tabular(black_box(data), inst.meta(), 10.0, 0.1).unwrap())
        });
    }
    group.finish();
}

fn linear(c: &mut Criterion) {
    let lin = random_linear(4, 8, 6, 0).unwrap();
    let mut group = c.benchmark_group("fkl_pcb_linear");
    for n in [1usize << 10, 1 << 16] {
        let data = sample_dataset(lin.base(), n, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, data| {
            b.iter(|| fit_fkl_pcb_linear(black_box(data), lin.meta(), 10.0, 0.1, LinearPcbConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sampling, tabular, linear);
criterion_main!(benches);
