use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vdmon::filter::{ei_step, sis_step, ParticleSet};
use vdmon::valuefn::{solve, Objective, Prune};
use vdmon::vds::{dynamic_select, SamplingPlan};
use vdmon::Belief;
use vdmon_bench::solved;

fn filters(c: &mut Criterion) {
    let (model, _) = solved("synthetic8");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let belief = Belief::random(model.num_states(), &mut rng);
    c.bench_function("exact update synthetic8", |b| {
        b.iter(|| model.belief_update(black_box(&belief), 0, 1).unwrap())
    });
    let mut group = c.benchmark_group("particle step synthetic8");
    for n in [20usize, 160, 1280] {
        let prior = ParticleSet::sample(&belief, n, &mut rng).unwrap();
        group.bench_with_input(BenchmarkId::new("sis", n), &prior, |b, p| {
            b.iter(|| sis_step(&model, p, 0, 1, n, &mut rng).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ei", n), &prior, |b, p| {
            b.iter(|| ei_step(&model, p, 0, 1, n, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn selection(c: &mut Criterion) {
    let (model, set) = solved("synthetic8");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let prior = ParticleSet::sample(&Belief::random(model.num_states(), &mut rng), 200, &mut rng)
        .unwrap();
    let plan = SamplingPlan::bounded(2.0, 0.1, 5);
    c.bench_function("dynamic select synthetic8", |b| {
        b.iter(|| dynamic_select(&model, &prior, 0, 1, &set, &plan, &mut rng).unwrap())
    });
}

fn solver(c: &mut Criterion) {
    let tiger = vdmon::fixtures::tiger();
    let mut group = c.benchmark_group("solve tiger horizon 4");
    group.sample_size(20);
    for prune in [Prune::Pointwise, Prune::Lp] {
        group.bench_function(format!("{prune:?}"), |b| {
            b.iter(|| solve(&tiger, 4, Objective::Maximize, prune).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, filters, selection, solver);
criterion_main!(benches);
