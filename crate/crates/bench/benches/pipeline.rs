use criterion::{criterion_group, criterion_main, Criterion};
use grasploop_bench::{suite, ORDINAL_QUERY};
use grasploop_core::{
    evaluate, fixtures, generate_suite, run_pipeline, Agents, EvalConfig, MockConfig, MockTools,
    PipelineConfig, Runner, SuiteConfig,
};
use std::hint::black_box;
use std::sync::Arc;

fn pipeline(c: &mut Criterion) {
    let scene = Arc::new(fixtures::three_bottles());
    let tools = MockTools::new(scene.clone(), MockConfig::default());
    let agents = Agents::scripted(scene.clone());
    let config = PipelineConfig::default();
    c.bench_function("run_pipeline/ordinal", |b| {
        b.iter(|| {
            run_pipeline(
                &scene,
                black_box(ORDINAL_QUERY),
                &agents,
                &tools,
                &config,
                None,
            )
        })
    });

    let cases = suite(40, 42);
    let mut group = c.benchmark_group("evaluate/40 cases");
    group.sample_size(20);
    for runner in [Runner::Loop, Runner::Baseline] {
        let config = EvalConfig {
            runner,
            ..Default::default()
        };
        group.bench_function(format!("{runner:?}").to_lowercase(), |b| {
            b.iter(|| evaluate(&cases, &config))
        });
    }
    group.finish();
}

fn generation(c: &mut Criterion) {
    let config = SuiteConfig {
        n_cases: 50,
        ..Default::default()
    };
    let mut group = c.benchmark_group("generate_suite");
    group.sample_size(20);
    group.bench_function("50 cases", |b| {
        b.iter(|| generate_suite(&config, black_box(42)))
    });
    group.finish();
}

criterion_group!(benches, pipeline, generation);
criterion_main!(benches);
