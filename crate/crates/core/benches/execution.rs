//! Sequential against parallel execution for the three data-parallel
//! workloads: optimizer restarts, rocket flag averages and bound sweeps.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use qcap::bounds::{branch_switch_sweep, theorem2_sweep, BoundParams};
use qcap::channels::{erasure, platypus};
use qcap::optimize::{maximize_coherent_information, OptimizerConfig};
use qcap::protocol::{evaluate_eq7_variant, RocketVariant, UnitarySource};
use qcap::Execution;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn restarts(c: &mut Criterion) {
    let ch = platypus(3).unwrap().tensor(&erasure(0.5, 2).unwrap()).unwrap();
    let mut group = c.benchmark_group("optimizer_restarts");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let cfg = OptimizerConfig { restarts: 8, max_iters: 200, execution: exec, ..OptimizerConfig::with_seed(1) };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| black_box(maximize_coherent_information(&ch, cfg).unwrap().value))
        });
    }
    group.finish();
}

fn flags(c: &mut Criterion) {
    let mut group = c.benchmark_group("eq7_clifford_flags");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let r = evaluate_eq7_variant(2, 0.5, RocketVariant::Direct, UnitarySource::Clifford, 0, 0, exec).unwrap();
                black_box(r.value_bits)
            })
        });
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let params: Vec<BoundParams> = (0..400)
        .map(|i| BoundParams::new(50 + (i % 200) as u64, 0.34 + 0.15 * (i as f64 / 400.0), 3).unwrap())
        .collect();
    let mut group = c.benchmark_group("bound_sweeps");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                black_box(theorem2_sweep(exec, &params).unwrap());
                black_box(branch_switch_sweep(exec, &params).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, restarts, flags, sweeps);
criterion_main!(benches);
