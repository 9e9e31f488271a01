use std::hint::black_box;

use bornlab_core::csl::{em_step, simulate, CollapseModel, NoiseIncrement, SimParams};
use bornlab_core::emergence::{measure_uniqueness_solve, rational_born_values, RationalState};
use bornlab_core::games::{pivotal_generators, value_solve, Game, PayoffFn};
use bornlab_core::histories::{consistency_check, HistorySet, IdentityResolution};
use bornlab_core::lln::{lln_tail, lln_tail_exact, LlnQuery};
use bornlab_core::{random_state, random_unitary, CMatrix, CoarseGraining, GrainingFamily};
use criterion::{criterion_group, criterion_main, Criterion};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn collapse(c: &mut Criterion) {
    let model = CollapseModel::qubit(CMatrix::zeros(2, 2), 1.0).unwrap();
    let psi = random_state(2, &mut ChaCha20Rng::seed_from_u64(1)).normalized().unwrap();
    let noise = NoiseIncrement { db: vec![0.01] };
    c.bench_function("em_step_qubit", |b| b.iter(|| em_step(&model, black_box(&psi), 1e-3, &noise).unwrap()));
    let params = SimParams { t_max: 2.0, dt: 1e-3, epsilon: 1e-6, record_every: 0 };
    c.bench_function("simulate_qubit_2000_steps", |b| b.iter(|| simulate(&model, &psi, &params, black_box(7)).unwrap()));
}

fn emergence(c: &mut Criterion) {
    let weights = vec![3, 1, 4, 1, 5];
    let g = CoarseGraining::unit_cells(weights.len()).unwrap();
    let r = RationalState::on_blocks(&g, weights).unwrap();
    let family = GrainingFamily::new(vec![g.clone()]).unwrap();
    c.bench_function("rational_born_values_5_blocks", |b| b.iter(|| rational_born_values(&r, &g, &family).unwrap()));
    let refined = rational_born_values(&r, &g, &family).unwrap().refined.unwrap();
    let fam = GrainingFamily::new(vec![refined.coarse, refined.fine]).unwrap();
    c.bench_function("measure_uniqueness_refined", |b| b.iter(|| measure_uniqueness_solve(&refined.state, &fam).unwrap()));
}

fn games(c: &mut Criterion) {
    let g = Game::two_outcome(-3.0, 4.0, PayoffFn::linear(2.0)).unwrap();
    let gens = pivotal_generators(&g).unwrap();
    c.bench_function("value_solve_pivotal_depth_4", |b| b.iter(|| value_solve(std::slice::from_ref(&g), &gens, 4).unwrap()));
}

fn histories(c: &mut Criterion) {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let res: Vec<_> = (0..4).map(|_| IdentityResolution::standard("z", 3).unwrap()).collect();
    let us: Vec<_> = (0..4).map(|_| random_unitary(3, &mut rng)).collect();
    let set = HistorySet::new(res, us, 1e-8).unwrap();
    let psi = random_state(3, &mut rng).normalized().unwrap();
    c.bench_function("consistency_check_81_histories", |b| b.iter(|| consistency_check(&set, black_box(&psi)).unwrap()));
}

fn lln(c: &mut Criterion) {
    let q = LlnQuery::new(100_000, 0.01, 0.3).unwrap();
    c.bench_function("lln_tail_float_n_1e5", |b| b.iter(|| lln_tail(black_box(&q)).unwrap()));
    let (delta, p) = (BigRational::new(BigInt::from(1), BigInt::from(20)), BigRational::new(BigInt::from(3), BigInt::from(10)));
    c.bench_function("lln_tail_exact_n_500", |b| b.iter(|| lln_tail_exact(black_box(500), &delta, &p).unwrap()));
}

criterion_group!(benches, collapse, emergence, games, histories, lln);
criterion_main!(benches);
