use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use orbitforge::{solve_symmetric, BBox, SolveConfig};
use orbitforge_bench::{chart, disk, ex2, ex2_expr};

fn evaluation(c: &mut Criterion) {
    let x = [0.3, -0.2];
    let mut g = c.benchmark_group("gradient");
    for (name, v) in [("builtin", ex2()), ("expression", ex2_expr())] {
        g.bench_function(BenchmarkId::new("ex2", name), |b| b.iter(|| v.gradient(black_box(&x))));
    }
    g.finish();
}

fn charting(c: &mut Criterion) {
    let v = ex2();
    let mut g = c.benchmark_group("chart");
    for n in [64usize, 128, 256] {
        g.bench_with_input(BenchmarkId::new("ex2", n), &n, |b, &n| b.iter(|| chart(&v, BBox::planar(-1.5, 1.5, -1.0, 1.0), [n, n])));
    }
    g.finish();
}

fn solving(c: &mut Criterion) {
    let v = disk();
    let ch = chart(&v, BBox::planar(-1.5, 1.5, -1.5, 1.5), [64, 64]);
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for nodes in [64usize, 128] {
        let cfg = SolveConfig { nodes, ..Default::default() };
        g.bench_with_input(BenchmarkId::new("disk_symmetric", nodes), &cfg, |b, cfg| b.iter(|| solve_symmetric(&v, &ch, cfg).unwrap()));
    }
    let v = ex2();
    let ch = chart(&v, BBox::planar(-1.5, 1.5, -1.0, 1.0), [128, 128]);
    let cfg = SolveConfig { nodes: 128, ..Default::default() };
    g.bench_function("ex2_symmetric/128", |b| b.iter(|| solve_symmetric(&v, &ch, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, evaluation, charting, solving);
criterion_main!(benches);
