use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use karel_core::mutation::random_program;
use karel_core::search::{evaluate_all, evaluate_all_sequential, search_rng, TaskObjective};
use karel_core::*;

fn batch_scoring(c: &mut Criterion) {
    let mut rng = search_rng(3);
    let programs: Vec<Program> = (0..64)
        .map(|_| random_program(&ProductionTable::default(), &mut rng, &AstLimits::default()))
        .collect();
    let mut group = c.benchmark_group("evaluate_batch_64");
    for task in [TaskId::DoorKey, TaskId::Harvester] {
        let objective = TaskObjective::new(generate_variants(task, 0, 32));
        group.bench_with_input(BenchmarkId::new("sequential", task), &objective, |b, o| {
            b.iter(|| evaluate_all_sequential(o, &programs))
        });
        group.bench_with_input(BenchmarkId::new("batched", task), &objective, |b, o| {
            b.iter(|| evaluate_all(o, &programs))
        });
    }
    group.finish();
}

criterion_group!(benches, batch_scoring);
criterion_main!(benches);
