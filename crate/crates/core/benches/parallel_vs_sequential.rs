use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use orbitfed::cli::{self, Baseline, ExperimentPlan, Mode, ScenarioSource};
use orbitfed::optimizer::grid::grid_oracle;
use orbitfed::par::Execution;
use orbitfed::scenario::{reference::random_instance, validate_scenario};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn grid(c: &mut Criterion) {
    let s = validate_scenario(random_instance(0, 1, 3)).unwrap();
    let mut g = c.benchmark_group("grid_oracle_3_clients");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| grid_oracle(&s, None, exec).unwrap())
        });
    }
    g.finish();
}

fn simulate(c: &mut Criterion) {
    let source = ScenarioSource::open(None).unwrap();
    let mut g = c.benchmark_group("simulate_reference_3_rounds");
    g.sample_size(10);
    for (name, exec) in MODES {
        let plan = ExperimentPlan {
            scenario: None,
            mode: Mode::Simulate,
            baseline: Baseline::Optimized,
            fedprox_mu: None,
            rounds: Some(3),
            seeds: None,
            target_acc: None,
            out: "unused".into(),
            single_step: false,
            persistent_battery: false,
            grid_oracle: false,
            execution: exec,
        };
        let loaded = source.load(0, &plan).unwrap();
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| cli::run_series(&loaded, &Baseline::Optimized, 0, &plan).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, grid, simulate);
criterion_main!(benches);
