// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use upbw_core::alloc::verify::{agreement_sweep, exhaustive_oracle_sweep};
use upbw_core::exec::{map_slice, Execution};
use upbw_core::helper::FilterParams;
use upbw_core::netsim::{run_capacity_test, PathConfig, SimConfig};
use upbw_core::sender::{SenderConfig, SessionConfig};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn alloc_sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("alloc");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new("agreement_2000", name), &mode, |b, &m| {
            b.iter(|| agreement_sweep(2_000, 50, 30, 1, m))
        });
        group.bench_with_input(BenchmarkId::new("oracle_n3", name), &mode, |b, &m| {
            b.iter(|| exhaustive_oracle_sweep(3, 3, m))
        });
    }
    group.finish();
}

fn sim_sweeps(c: &mut Criterion) {
    let sizes: Vec<u32> = (10..=15).map(|e| 1 << e).collect();
    let seeds: Vec<u64> = (0..8).collect();
    let mut group = c.benchmark_group("netsim");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new("size_x_seed", name), &mode, |b, &m| {
            b.iter(|| {
                map_slice(&seeds, m, |&seed| {
                    sizes
                        .iter()
                        .map(|&size| {
                            let paths = [0.02, 0.035, 0.05]
                                .iter()
                                .map(|&l| PathConfig { jitter: 0.002, ..PathConfig::clean(100_000.0, l) })
                                .collect();
                            let mut sim = SimConfig::new(240_000.0, paths);
                            sim.seed = seed;
                            sim.record_trace = false;
                            let session = SessionConfig::new(SenderConfig::uniform(3, 20, size));
                            run_capacity_test(&sim, &session, &FilterParams::default())
                                .expect("valid scenario")
                                .value_bps()
                        })
                        .collect::<Vec<_>>()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, alloc_sweeps, sim_sweeps);
criterion_main!(benches);
