use criterion::{black_box, criterion_group, criterion_main, Criterion};
use pegfinder_core::continuation::{
    find_all_branches, find_equilateral_triangle, find_square, multistart_squares, trace_branch,
};
use pegfinder_core::corpus::fourier_random;
use pegfinder_core::residuals::{square_residual, EdgeRatioSystem};
use pegfinder_core::{ClosedCurve, DistanceField, PolygonParam, TraceSettings};

fn residuals(c: &mut Criterion) {
    let curve = fourier_random(4, 0.3, 1).unwrap();
    let p = PolygonParam::new(0.1, vec![0.2, 0.3, 0.25, 0.25]).unwrap();
    c.bench_function("square_residual", |b| {
        b.iter(|| square_residual(&curve, black_box(&p)))
    });
}

fn tracing(c: &mut Criterion) {
    let circle = ClosedCurve::circle(1.0).unwrap();
    let sys = EdgeRatioSystem::regular(&circle, 4).unwrap();
    let s = TraceSettings::default();
    let u = [0.1, 0.25, 0.25, 0.25];
    c.bench_function("trace_regular_quads_on_circle", |b| {
        b.iter(|| trace_branch(&sys, black_box(&u), &s, &[]).unwrap())
    });

    let curve = fourier_random(4, 0.3, 2).unwrap();
    let sys = EdgeRatioSystem::regular(&curve, 3).unwrap();
    c.bench_function("all_triangle_branches_fourier", |b| {
        b.iter(|| find_all_branches(&sys, &s, &[]).unwrap())
    });
}

fn finders(c: &mut Criterion) {
    let mut group = c.benchmark_group("finders");
    group.sample_size(10);
    let curve = fourier_random(4, 0.3, 3).unwrap();
    let s = TraceSettings::default();
    group.bench_function("find_square_fourier", |b| {
        b.iter(|| find_square(&curve, &s).unwrap())
    });
    group.bench_function("multistart_squares_16x16", |b| {
        b.iter(|| multistart_squares(&curve, 16, 16))
    });
    let field = DistanceField::random_synthetic(3, 0.6, 5).unwrap();
    group.bench_function("equilateral_triangle_synthetic", |b| {
        b.iter(|| find_equilateral_triangle(&field, &s).unwrap())
    });
    group.finish();
}

criterion_group!(benches, residuals, tracing, finders);
criterion_main!(benches);
