use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tmaris_bench::instance;
use tmaris_core::admm::solve_problem;
use tmaris_core::{rng_from_seed, SolverOptions};

fn per_iteration(c: &mut Criterion) {
    let opts = SolverOptions { max_iters: 10, tolerance: f64::MIN_POSITIVE, ..Default::default() };
    let mut group = c.benchmark_group("ten_iterations");
    for side in [8, 11, 16, 22] {
        let p = instance(side, 5, 1);
        group.bench_with_input(BenchmarkId::new("elements", side * side), &p, |b, p| {
            b.iter(|| solve_problem(p, &opts, &mut rng_from_seed(2)).unwrap())
        });
    }
    for users in [2, 4, 8, 16] {
        let p = instance(8, users, 1);
        group.bench_with_input(BenchmarkId::new("users", users), &p, |b, p| {
            b.iter(|| solve_problem(p, &opts, &mut rng_from_seed(2)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, per_iteration);
criterion_main!(benches);
