//! Monte-Carlo throughput with and without the thread pool, and the cost of
//! one controller step for the γ and α parametrizations.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ddpc::control::{Controller, Measurement, SchemeConfig};
use ddpc::harness::{run_experiment, ExperimentConfig, RhoChoice, RunData};
use ddpc::par::Execution;
use ddpc::predictor::InitialCondition;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        n_data: 400,
        n_monte_carlo: 8,
        test_length: 20,
        rho: RhoChoice::Fixed(10),
        horizon: 20,
        ..ExperimentConfig::default()
    }
}

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = ExperimentConfig { execution: exec, ..small() };
        g.bench_function(BenchmarkId::from_parameter(format!("{exec:?}").to_lowercase()), |b| {
            b.iter(|| run_experiment(&cfg).unwrap())
        });
    }
    g.finish();
}

fn controller_step(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let run = RunData::prepare(&cfg, 0).unwrap();
    let rho = run.rho(&cfg).unwrap();
    let pd = run.predictor(rho, cfg.horizon).unwrap();
    let spec = cfg.control_spec(rho).unwrap();
    let init = InitialCondition::from_batch(&run.training, rho, rho).unwrap();
    let mut g = c.benchmark_group("controller_step");
    for scheme in [
        SchemeConfig::GammaDdpc,
        SchemeConfig::SpcSlack { lambda: 1e4 },
        SchemeConfig::Berberich {
            bar_lambda_alpha: 1e-2,
            lambda_sigma: 1e6,
            null_output_slack: false,
        },
    ] {
        let mut ctrl = Controller::data_driven(&pd, &spec, scheme).unwrap();
        g.bench_function(BenchmarkId::from_parameter(scheme.name()), |b| {
            b.iter(|| ctrl.step(Measurement::Window(&init)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, monte_carlo, controller_step);
criterion_main!(benches);
