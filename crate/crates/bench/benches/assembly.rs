use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nlneumann::lcfun::gagliardo_pair_sum;
use nlneumann::operators::resolvent_matrix;
use nlneumann::solvers::{solve_strong, solve_weak, spectrum, DEFAULT_EIGEN_CAP};
use nlneumann::verify::{random_lcfunction, random_zero_mean};
use nlneumann::{
    lambda_n, FieldModel, Gauge, Grid, NeumannProblem, OperatorMatrix, Tolerances, WeightFunction,
};

fn grid(domain: i32, outer: i32, nu: i32) -> Grid {
    Grid::new(
        FieldModel::effective_params(2, 1, 2.0).unwrap(),
        domain,
        outer,
        nu,
    )
    .unwrap()
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_vt");
    for nu in [4, 6, 8] {
        let g = grid(2, 4, nu);
        group.bench_with_input(BenchmarkId::from_parameter(g.coset_count()), &g, |b, g| {
            b.iter(|| OperatorMatrix::assemble_vt(black_box(g)))
        });
    }
    group.finish();
}

fn pair_sums(c: &mut Criterion) {
    let mut group = c.benchmark_group("gagliardo_pair_sum");
    for nu in [4, 6, 8] {
        let g = grid(2, 4, nu);
        let u = random_lcfunction(&g, 1);
        let v = random_lcfunction(&g, 2);
        group.bench_function(BenchmarkId::from_parameter(g.coset_count()), |b| {
            b.iter(|| gagliardo_pair_sum(black_box(&u), black_box(&v)).unwrap())
        });
    }
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let g = grid(2, 3, 4);
    let f = random_zero_mean(&g, 7);
    let p = NeumannProblem::new(
        g,
        &f,
        WeightFunction::zero(g),
        Gauge::ZeroMean,
        Tolerances::default(),
    )
    .unwrap();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    group.bench_function("galerkin", |b| {
        b.iter(|| solve_weak(black_box(&p)).unwrap())
    });
    group.bench_function("fredholm", |b| {
        b.iter(|| solve_strong(black_box(&p)).unwrap())
    });
    group.finish();
}

fn resolvent_and_spectrum(c: &mut Criterion) {
    let g = grid(2, 2, 5);
    let lam = lambda_n(g.field(), g.domain_level());
    c.bench_function("resolvent_matrix/128", |b| {
        b.iter(|| resolvent_matrix(black_box(&g), lam).unwrap())
    });
    let mut group = c.benchmark_group("spectrum");
    group.sample_size(10);
    group.bench_function("128", |b| {
        b.iter(|| spectrum(black_box(&g), DEFAULT_EIGEN_CAP).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    assembly,
    pair_sums,
    solvers,
    resolvent_and_spectrum
);
criterion_main!(benches);
