use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qrobust_core::bounds::{qef_rate_bound_integral, worst_case_bound_closed, worst_case_bound_numeric};
use qrobust_core::certificate::{make_certificate, optimize_mu};
use qrobust_core::matnum::{expm, solve_lyapunov};
use qrobust_core::oqho::{build_state_space, invariant_model, random_params};
use qrobust_core::oracle::classical_spectral_rate;
use qrobust_core::OqhoParams;

fn model(n: usize) -> OqhoParams {
    random_params(&mut ChaCha8Rng::seed_from_u64(n as u64), n, 2, 1e-2)
}

fn matnum(c: &mut Criterion) {
    let mut group = c.benchmark_group("matnum");
    for n in [2, 4, 8, 16] {
        let ss = build_state_space(&model(n)).unwrap();
        let q = &ss.b * ss.b.transpose();
        group.bench_with_input(BenchmarkId::new("lyapunov", n), &n, |b, _| {
            b.iter(|| solve_lyapunov(black_box(&ss.a), black_box(&q)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("expm", n), &n, |b, _| {
            b.iter(|| expm(black_box(&(&ss.a * 3.0))))
        });
    }
    group.finish();
}

fn certificate(c: &mut Criterion) {
    let params = model(4);
    let ss = build_state_space(&params).unwrap();
    let inv = invariant_model(&params, &ss).unwrap();
    let mu = 0.5 * ss.decay_margin();
    c.bench_function("certificate/make", |b| {
        b.iter(|| make_certificate(&ss, &inv, &params, black_box(mu)).unwrap())
    });
    c.bench_function("certificate/optimize_mu_64", |b| {
        b.iter(|| optimize_mu(&ss, &inv, &params, black_box(1.0), 64).unwrap())
    });
}

fn bounds(c: &mut Criterion) {
    let params = OqhoParams::unit_oscillator();
    let ss = build_state_space(&params).unwrap();
    let inv = invariant_model(&params, &ss).unwrap();
    let cert = make_certificate(&ss, &inv, &params, 1.0).unwrap();
    let theta = 0.5 * cert.theta_max();
    c.bench_function("bounds/closed", |b| b.iter(|| worst_case_bound_closed(black_box(1.0), 2, &cert).unwrap()));
    c.bench_function("bounds/numeric_256", |b| {
        b.iter(|| worst_case_bound_numeric(black_box(1.0), 2, &cert, 256).unwrap())
    });
    c.bench_function("bounds/integral", |b| {
        b.iter(|| qef_rate_bound_integral(black_box(theta), 2, &cert, 1e-9).unwrap())
    });
    c.bench_function("oracle/spectral_rate", |b| {
        b.iter(|| classical_spectral_rate(&ss, &params, black_box(0.25)).unwrap())
    });
}

criterion_group!(benches, matnum, certificate, bounds);
criterion_main!(benches);
