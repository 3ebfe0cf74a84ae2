use criterion::{criterion_group, criterion_main, Criterion};
use levy_field::sheets::duality_check;
use levy_field::verify::dcov_permutation;
use levy_field::{sample_field, JumpLaw, Preset, Region, SamplerConfig, TestFunction};

fn independence(c: &mut Criterion) {
    let x: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 10_007) as f64).collect();
    let y: Vec<f64> = (0..10_000).map(|i| ((i * 104_729) % 10_009) as f64).collect();
    let mut group = c.benchmark_group("dcov");
    group.sample_size(10);
    group.bench_function("n10000-b200", |b| b.iter(|| dcov_permutation(&x, &y, 200, 1).unwrap()));
    group.finish();
}

fn duality(c: &mut Criterion) {
    let chars = Preset::CompoundPoisson { rate: 50.0, jumps: JumpLaw::Constant { value: 1.0 } }.build(2).unwrap();
    let real = sample_field(&chars, &SamplerConfig::new(5, Region::unit(2)).with_eps(0.0)).unwrap();
    let f = TestFunction::Bump { center: vec![0.5, 0.5], radius: 0.4, power: Some(6) };
    let mut group = c.benchmark_group("duality-2d");
    group.sample_size(10);
    group.bench_function("h-0.01", |b| b.iter(|| duality_check(&real, &f, 1.0, 0.01).unwrap()));
    group.finish();
}

criterion_group!(benches, independence, duality);
criterion_main!(benches);
