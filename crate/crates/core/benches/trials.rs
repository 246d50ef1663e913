use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lowrank_bp::experiment::{run_bp_tail, BpTailConfig};
use lowrank_bp::gen::{random_model, rng_for, sample_instance, Adversary};
use lowrank_bp::pipeline::{recover_dataset, PipelineConfig};
use lowrank_bp::Execution;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn bp_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("bp_tail_200_trials");
    group.sample_size(10);
    for exec in MODES {
        let cfg = BpTailConfig { d: 300, k: 2, s: 3, trials: 200, seed: 1, execution: exec, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| run_bp_tail(cfg).unwrap())
        });
    }
    group.finish();
}

fn pipeline_rows(c: &mut Criterion) {
    let model = random_model(&mut rng_for(4, 0), 100, 3, 1.0).unwrap();
    let inst = sample_instance(&model, 500, 3, Adversary::RandomSign { bound: 1.0 }, 2).unwrap();
    let mut group = c.benchmark_group("pipeline_500_rows");
    group.sample_size(10);
    for exec in MODES {
        let cfg = PipelineConfig { subspace_override: Some(inst.subspace.clone()), execution: exec, ..PipelineConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| recover_dataset(&inst.corrupted, cfg, Some(1.0)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bp_trials, pipeline_rows);
criterion_main!(benches);
