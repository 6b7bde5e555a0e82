use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use orpool_core::evaluator::{EvalPlan, SpecialtyOrder};
use orpool_core::fixtures::random_solution;
use orpool_core::generator::{generate, GeneratorConfig};
use orpool_core::saa::evaluate_upper_bound;
use orpool_core::sampling::{sample_bundle, SamplerConfig};

fn setup() -> (orpool_core::domain::Instance, orpool_core::domain::FirstStageSolution) {
    let mut inst = generate(&GeneratorConfig {
        weeks: 2,
        n_specialties: 4,
        seed: 1,
        ..GeneratorConfig::default()
    })
    .expect("valid config");
    let sol = random_solution(&mut inst, 1);
    (inst, sol)
}

fn recourse(c: &mut Criterion) {
    let (inst, sol) = setup();
    let bundle = sample_bundle(&inst, SamplerConfig::with_seed(2), 64).unwrap();
    let plan = EvalPlan::new(&inst, &sol).unwrap();
    let order = SpecialtyOrder::identity(inst.specialty_count());

    c.bench_function("recourse_cost", |b| {
        let mut k = 0;
        b.iter(|| {
            k = (k + 1) % bundle.len();
            plan.recourse_cost(black_box(&bundle[k])).unwrap()
        })
    });
    c.bench_function("evaluate_with_allocation", |b| {
        b.iter(|| plan.evaluate(black_box(&bundle[0]), &order).unwrap())
    });
}

fn upper_bound(c: &mut Criterion) {
    let (inst, sol) = setup();
    let bundle = sample_bundle(&inst, SamplerConfig::with_seed(3), 1000).unwrap();
    let mut group = c.benchmark_group("upper_bound");
    group.sample_size(20);
    group.bench_function("evaluate_1000", |b| {
        b.iter(|| evaluate_upper_bound(&inst, black_box(&sol), &bundle).unwrap())
    });
    group.bench_function("sample_1000", |b| {
        b.iter_batched(
            || SamplerConfig::with_seed(4),
            |cfg| sample_bundle(&inst, cfg, 1000).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, recourse, upper_bound);
criterion_main!(benches);
