use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use levy_field::sampler::{sample_marginal, sample_stable_marginal_oracle};
use levy_field::{sample_field, Preset, Region, SamplerConfig};
use std::hint::black_box;

fn marginal(c: &mut Criterion) {
    let chars = Preset::BalanStable { alpha: 1.5, p: 0.5, q: 0.5 }.build(1).unwrap();
    let mut group = c.benchmark_group("stable-marginal-1000");
    group.sample_size(10);
    for eps in [1e-1, 1e-2, 1e-3] {
        let cfg = SamplerConfig::new(1, Region::unit(1)).with_eps(eps).with_replicates(1000);
        group.bench_with_input(BenchmarkId::from_parameter(eps), &cfg, |b, cfg| {
            b.iter(|| sample_marginal(&chars, cfg, 1.0, &Region::unit(1)).unwrap())
        });
    }
    group.finish();
    c.bench_function("cms-oracle-1000", |b| {
        b.iter(|| sample_stable_marginal_oracle(1.5, 0.0, 1.0, black_box(1000), 7).unwrap())
    });
}

fn realization(c: &mut Criterion) {
    let chars = Preset::BalanStable { alpha: 1.5, p: 0.5, q: 0.5 }.build(2).unwrap();
    let cfg = SamplerConfig::new(3, Region::unit(2)).with_eps(1e-2);
    c.bench_function("realize-and-evaluate-2d", |b| {
        b.iter(|| {
            let real = sample_field(&chars, &cfg).unwrap();
            real.evaluate(1.0, &Region::unit(2)).unwrap()
        })
    });
}

criterion_group!(benches, marginal, realization);
criterion_main!(benches);
