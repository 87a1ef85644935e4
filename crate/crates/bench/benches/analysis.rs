use std::f64::consts::FRAC_PI_4;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rfimdi_core::{
    analyze, conservative_interval, ideal_table, min_modulus_rfi, ChannelParams, CheckingPair,
    Mode, PhaseSystem, Settings,
};

fn noisy_table() -> rfimdi_core::ProbabilityTable {
    ideal_table(ChannelParams::new(0.01, FRAC_PI_4).unwrap()).unwrap()
}

fn bench_interval(c: &mut Criterion) {
    let table = noisy_table();
    let settings = Settings::default();
    c.bench_function("conservative_interval (2,3), e_b=0.01", |b| {
        b.iter(|| {
            conservative_interval(black_box(&table), CheckingPair::ALL[1], &settings.optimizer)
                .unwrap()
        })
    });
}

fn bench_modulus(c: &mut Criterion) {
    let settings = Settings::default();
    let report = analyze(&noisy_table(), Mode::Rfi, &settings).unwrap();
    let system = PhaseSystem::new(report.intervals.map(Option::unwrap));
    c.bench_function("min_modulus_rfi arcs", |b| {
        b.iter(|| min_modulus_rfi(black_box(&system), &settings.modulus).unwrap())
    });
}

fn bench_analyze(c: &mut Criterion) {
    let table = noisy_table();
    let settings = Settings::default();
    let mut group = c.benchmark_group("analyze");
    group.sample_size(10);
    group.bench_function("rfi", |b| {
        b.iter(|| analyze(black_box(&table), Mode::Rfi, &settings).unwrap())
    });
    group.bench_function("nonrfi", |b| {
        b.iter(|| analyze(black_box(&table), Mode::NonRfi, &settings).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_interval, bench_modulus, bench_analyze);
criterion_main!(benches);
