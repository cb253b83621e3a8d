//! Microbenchmarks for the hot kernels: contact-field evaluation, flow
//! integration, quadrature and distance assembly.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use reebflow_bench::{bench_chart, bench_field};
use reebflow_core::calculus;
use reebflow_core::flows::Isotopy;
use reebflow_core::metrics::{self, MetricParams, ResSpec};

fn field_evaluation(c: &mut Criterion) {
    let chart = bench_chart();
    let field = bench_field();
    let steps = chart.grad_fd_steps();
    let x = [0.55, 1.3, 0.2];
    let mut grad = [0.0; 3];
    let mut out = [0.0; 3];

    let mut group = c.benchmark_group("contact_field");
    group.throughput(Throughput::Elements(1));
    group.bench_function("closed_form", |b| {
        b.iter(|| {
            calculus::gamma_fast_into(
                &chart,
                &field,
                &steps,
                &mut grad,
                black_box(&x),
                0.0,
                &mut out,
            )
            .unwrap();
            black_box(out[0])
        })
    });
    group.bench_function("kernel_solver", |b| {
        b.iter(|| {
            let v = calculus::gamma(&chart, &field, black_box(&x), 0.0).unwrap();
            black_box(v.components[0])
        })
    });
    group.finish();
}

fn flow_integration(c: &mut Criterion) {
    let chart = bench_chart();
    let field = bench_field();
    let mut group = c.benchmark_group("flow");
    for &step in &[1e-2, 1e-3] {
        let phi = Isotopy::new(chart.clone(), field.clone(), step);
        group.throughput(Throughput::Elements((1.0 / step) as u64));
        group.bench_function(format!("time_one_step_{step:.0e}"), |b| {
            b.iter(|| black_box(phi.point(black_box(&[0.5, 1.0, 0.1]), 1.0).unwrap()))
        });
    }
    group.finish();
}

fn quadrature(c: &mut Criterion) {
    let chart = bench_chart();
    let field = bench_field();
    let mut group = c.benchmark_group("quadrature");
    let res = [48usize, 48, 8];
    group.throughput(Throughput::Elements(res.iter().product::<usize>() as u64));
    group.bench_function("integrate_48x48x8", |b| {
        b.iter(|| black_box(chart.integrate_scalar_res(&field, 0.0, &res)))
    });
    group.finish();
}

fn distances(c: &mut Criterion) {
    let chart = bench_chart();
    let field = bench_field();
    let other = {
        let mut rng = reebflow_core::sampling::rng(11);
        reebflow_core::fields::families::cylinder_flow_safe(&mut rng, 0.3, 0.05, 1.0, 2)
    };
    let phi = Isotopy::new(chart.clone(), field, 1e-2);
    let psi = Isotopy::new(chart.clone(), other, 1e-2);
    let params = MetricParams {
        quad_res: ResSpec::PerCoord(vec![16, 12, 6]),
        osc_res: ResSpec::PerCoord(vec![16, 12, 6]),
        time_segments: 4,
        sup_samples: 64,
        sup_margin: 0.02,
        normalize_volume: false,
    };
    let mut group = c.benchmark_group("distances");
    group.sample_size(10);
    group.bench_function("d_cont_16x12x6", |b| {
        b.iter(|| black_box(metrics::contact_distances(&phi, &psi, &params).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, field_evaluation, flow_integration, quadrature, distances);
criterion_main!(benches);
