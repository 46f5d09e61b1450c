use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hazardforge_core::boost::candidate_thresholds;
use hazardforge_core::synth::{simulate, ScenarioSpec};
use hazardforge_core::{train, TrainConfig};

fn cohort(n: usize) -> hazardforge_core::synth::SimulatedCohort {
    let mut spec = ScenarioSpec::preset("two-group", 1).unwrap();
    spec.n_episodes = n;
    simulate(&spec).unwrap()
}

fn bench_train(c: &mut Criterion) {
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    for n in [250, 1000] {
        let data = cohort(n);
        group.bench_with_input(BenchmarkId::new("depth3_x25", n), &data, |b, d| {
            b.iter(|| train(&d.episodes, &d.schema, &TrainConfig::new(3, 25)).unwrap())
        });
    }
    group.finish();
}

fn bench_candidates(c: &mut Criterion) {
    let data = cohort(1000);
    let width = data.schema.width();
    c.bench_function("candidate_thresholds/1000", |b| {
        b.iter(|| candidate_thresholds(&data.episodes, width, 256))
    });
}

criterion_group!(benches, bench_train, bench_candidates);
criterion_main!(benches);
