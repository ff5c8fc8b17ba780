use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use nvsvi_core::{
    f_closed_form, f_quadrature, limit_at, CouplingHypothesis, Experiment, LimitAnalysis,
    SourceGeometry,
};

fn form_factor(c: &mut Criterion) {
    let half = SourceGeometry::nominal();
    let offset = SourceGeometry::new(250e-6, 250e-6, 1.33e30, [1.3e-6, 0.0]).unwrap();
    c.bench_function("f_closed_form", |b| {
        b.iter(|| f_closed_form(black_box(200e-6), &half, black_box(2e-6)).unwrap())
    });
    c.bench_function("f_quadrature_axis", |b| {
        b.iter(|| f_quadrature(black_box(200e-6), &half, black_box(2e-6), 1e-7).unwrap())
    });
    c.bench_function("f_quadrature_offset", |b| {
        b.iter(|| f_quadrature(black_box(200e-6), &offset, black_box(2e-6), 1e-7).unwrap())
    });
}

fn phase(c: &mut Criterion) {
    let exp = Experiment::nominal();
    let hyp = CouplingHypothesis::new(200e-6, 1e-19).unwrap();
    c.bench_function("accumulated_phase", |b| {
        b.iter(|| exp.phase(black_box(&hyp)).unwrap())
    });
}

fn limit(c: &mut Criterion) {
    let analysis = LimitAnalysis::nominal();
    let mut group = c.benchmark_group("limit");
    group.sample_size(10);
    group.bench_function("limit_at_200um", |b| {
        b.iter(|| limit_at(black_box(200e-6), &analysis).unwrap())
    });
    group.finish();
}

criterion_group!(benches, form_factor, phase, limit);
criterion_main!(benches);
