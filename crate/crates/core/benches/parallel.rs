//! One worker against the full pool on the hot kernels. Build with
//! `--no-default-features` to time the sequential fallback itself.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mmsgeo::minkowski::{content, distance_to_set, ContentKind, Window};
use mmsgeo::par;
use mmsgeo::slope::slope_at_scale;
use mmsgeo::space::{Density, SampledSpace};

fn disk(n: usize) -> (SampledSpace, mmsgeo::space::SetIndicator) {
    let s = SampledSpace::grid_box(2, n, &[(-2.0, 2.0), (-2.0, 2.0)], &Density::Unit).unwrap();
    let a = s.indicator_where(|c| c[0] * c[0] + c[1] * c[1] <= 1.0);
    (s, a)
}

fn kernels(c: &mut Criterion) {
    let (s, a) = disk(256);
    let cone = s.field_from(|c| (1.0 - (c[0] * c[0] + c[1] * c[1]).sqrt()).max(0.0)).unwrap();
    let window = Window::default_for(&s);
    let mut g = c.benchmark_group("kernels");
    g.sample_size(10);
    for (label, workers) in [("one_worker", Some(1)), ("pool", None)] {
        g.bench_with_input(BenchmarkId::new("distance", label), &workers, |b, &w| {
            b.iter(|| par::with_workers(w, || distance_to_set(&s, &a).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("slope", label), &workers, |b, &w| {
            b.iter(|| par::with_workers(w, || slope_at_scale(&s, &cone, 3.0 * s.resolution_h()).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("content", label), &workers, |b, &w| {
            b.iter(|| par::with_workers(w, || content(&s, &a, &window, ContentKind::Lower).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
