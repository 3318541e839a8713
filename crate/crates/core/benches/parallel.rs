//! Parallel vs sequential execution for the two hot loops: record
//! generation and bootstrap replication.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use causal_workbench::estimands::{resolve, Contrast, EstimandSpec, Exposure};
use causal_workbench::exec::Execution;
use causal_workbench::inference::{bootstrap_se, BootstrapPlan};
use causal_workbench::nuc::{crude, ipw};
use causal_workbench::propensity::{fit_ps, make_weights, Truncation, WeightKind};
use causal_workbench::simlearner::{generate, records_to_dataset, DgpConfig};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn config(n: usize) -> DgpConfig {
    DgpConfig {
        n,
        seed: 1,
        ..DgpConfig::calibrated()
    }
}

fn generation(c: &mut Criterion) {
    let mut g = c.benchmark_group("generate_200k");
    g.sample_size(10);
    let cfg = config(200_000);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| generate(&cfg, exec).unwrap()));
    }
    g.finish();
}

fn bootstrap(c: &mut Criterion) {
    let data = records_to_dataset(&generate(&config(17044), Execution::Parallel).unwrap(), false);
    let spec = EstimandSpec::new(Contrast::Ate, Exposure::A2);
    let frame = resolve(&spec, &data).unwrap();
    let mut g = c.benchmark_group("bootstrap_ipw_b100");
    g.sample_size(10);
    for (name, exec) in MODES {
        let plan = BootstrapPlan::new(100, 1).with_exec(exec);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                bootstrap_se(frame.len(), &plan, |idx| {
                    let f = frame.resample(idx);
                    let ps = fit_ps(&f)?;
                    let w = make_weights(&ps.scores, &f.a, WeightKind::AteStabilized, Truncation::None)?;
                    Ok(ipw(&f, &w, Contrast::Ate)?.estimate)
                })
                .unwrap()
            })
        });
    }
    // the cheapest estimator shows the per-replicate overhead
    let a1 = resolve(&EstimandSpec::new(Contrast::Ate, Exposure::A1), &data).unwrap();
    for (name, exec) in MODES {
        let plan = BootstrapPlan::new(100, 1).with_exec(exec);
        g.bench_function(BenchmarkId::new("crude", name), |b| {
            b.iter(|| bootstrap_se(a1.len(), &plan, |idx| Ok(crude(&a1.resample(idx))?.estimate)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, generation, bootstrap);
criterion_main!(benches);
