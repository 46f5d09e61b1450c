use criterion::{criterion_group, criterion_main, Criterion};
use hazardforge_core::eval::{episode_score, roc_pr_curves, MonitoringTrace};
use hazardforge_core::monitor::score_episode;
use hazardforge_core::synth::{simulate, ScenarioSpec};
use hazardforge_core::{neg_log_likelihood, train, TrainConfig};

fn bench_scoring(c: &mut Criterion) {
    let mut spec = ScenarioSpec::preset("step", 3).unwrap();
    spec.n_episodes = 500;
    let data = simulate(&spec).unwrap();
    let model = train(&data.episodes, &data.schema, &TrainConfig::default()).unwrap();

    c.bench_function("nll/500", |b| b.iter(|| neg_log_likelihood(&model, &data.episodes)));
    c.bench_function("hazard_paths/500", |b| {
        b.iter(|| {
            data.episodes
                .iter()
                .map(|e| score_episode(&model, e).len())
                .sum::<usize>()
        })
    });
    c.bench_function("auroc/500", |b| {
        b.iter(|| {
            let scores: Vec<_> = data
                .episodes
                .iter()
                .map(|e| episode_score(&MonitoringTrace::from_model(&model, e).unwrap()))
                .collect();
            roc_pr_curves(&scores).unwrap().auroc
        })
    });
}

criterion_group!(benches, bench_scoring);
criterion_main!(benches);
