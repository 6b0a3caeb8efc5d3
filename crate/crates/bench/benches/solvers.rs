use aoi_bench::{spread_params, spread_spec};
use aoi_core::game_bayesian::{bayesian_nash, bayesian_social_optimum};
use aoi_core::game_complete::{nash_equilibrium, social_optimum};
use aoi_core::mech_bayesian::BayesianMechanism;
use aoi_core::mech_complete::CompleteMechanism;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn complete(c: &mut Criterion) {
    let mut g = c.benchmark_group("complete");
    for n in [2, 8, 32] {
        let p = spread_params(n, 1.0);
        g.bench_with_input(BenchmarkId::new("nash", n), &p, |b, p| b.iter(|| nash_equilibrium(black_box(p)).unwrap()));
        g.bench_with_input(BenchmarkId::new("optimum", n), &p, |b, p| b.iter(|| social_optimum(black_box(p)).unwrap()));
        let m = CompleteMechanism::new(&p).unwrap();
        g.bench_with_input(BenchmarkId::new("plan", n), &m, |b, m| b.iter(|| m.plan(black_box(0.5)).unwrap()));
    }
    g.finish();
}

fn bayesian(c: &mut Criterion) {
    let mut g = c.benchmark_group("bayesian");
    for n in [2, 8, 32] {
        let s = spread_spec(n, 1.0);
        g.bench_with_input(BenchmarkId::new("nash", n), &s, |b, s| b.iter(|| bayesian_nash(black_box(s)).unwrap()));
        g.bench_with_input(BenchmarkId::new("optimum", n), &s, |b, s| {
            b.iter(|| bayesian_social_optimum(black_box(s)).unwrap())
        });
        let m = BayesianMechanism::new(&s).unwrap();
        g.bench_with_input(BenchmarkId::new("plan", n), &m, |b, m| b.iter(|| m.plan(black_box(0.5)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, complete, bayesian);
criterion_main!(benches);
