use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lanehrl_core::harness::ModelSet;
use lanehrl_core::motion::{solve_quintic, BoundaryState};
use lanehrl_core::nn::AdamState;
use lanehrl_core::sim::{canonical_scenario, observe_decision_state, ScenarioConfig};
use lanehrl_bench::{batch, state};
use lanehrl_core::value::{train_step_dqn, train_step_quadratic, QuadraticAdam};

fn forward(c: &mut Criterion) {
    let m = ModelSet::fresh(0).unwrap();
    let s = state(3);
    c.bench_function("dqn_forward", |b| b.iter(|| m.dqn.q_values(black_box(&s)).unwrap()));
    c.bench_function("quadratic_heads", |b| b.iter(|| m.following.heads(black_box(&s)).unwrap()));
}

fn train_steps(c: &mut Criterion) {
    let m = ModelSet::fresh(1).unwrap();
    let qb = batch(|i| -4.0 + (i % 7) as f64);
    let target = m.following.clone();
    c.bench_function("quadratic_train_step_b64", |b| {
        b.iter_batched(
            || (m.following.clone(), QuadraticAdam::new(&m.following, 5e-4)),
            |(mut model, mut adam)| train_step_quadratic(&mut model, &target, &qb, 0.99, 1.0, &mut adam).unwrap(),
            BatchSize::SmallInput,
        )
    });
    let db = batch(|i| i % 2);
    let dtarget = m.dqn.clone();
    c.bench_function("dqn_train_step_b64", |b| {
        b.iter_batched(
            || (m.dqn.clone(), AdamState::new(&m.dqn.net.spec, 5e-4)),
            |(mut model, mut adam)| train_step_dqn(&mut model, &dtarget, &db, 0.99, &mut adam).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn quintic(c: &mut Criterion) {
    let a = BoundaryState { x: 0.0, vx: 20.0, ax: 0.0, y: 1.875, vy: 0.0, ay: 0.0 };
    let z = BoundaryState { x: 100.0, vx: 20.0, ax: 0.0, y: 5.625, vy: 0.0, ay: 0.0 };
    c.bench_function("quintic_solve", |b| b.iter(|| solve_quintic(black_box(&a), black_box(&z), 0.0, 5.0).unwrap()));
}

fn world(c: &mut Criterion) {
    let w = canonical_scenario(&ScenarioConfig::default()).unwrap();
    c.bench_function("world_step", |b| {
        b.iter_batched(|| w.clone(), |mut w| w.step(black_box(0.5), 0.0), BatchSize::SmallInput)
    });
    c.bench_function("observe_state", |b| b.iter(|| observe_decision_state(black_box(&w), 1).unwrap()));
}

criterion_group!(benches, forward, train_steps, quintic, world);
criterion_main!(benches);
