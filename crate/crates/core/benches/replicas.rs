use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use haarblocks::experiments::{run_concentration, run_mdp_block, Schedule};
use haarblocks::parallel::map_indexed;
use haarblocks::sampling::sample_scaled_block;
use haarblocks::{derive_replica_seed, frobenius_sq, BlockDims, Execution, Seed};

const MODES: [(&str, Execution); 2] = [("serial", Execution::Serial), ("parallel", Execution::Parallel)];

fn block_draws(c: &mut Criterion) {
    let mut group = c.benchmark_group("block_draws");
    let dims = BlockDims::new(1000, 4, 4).unwrap();
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, 10_000), &exec, |b, &exec| {
            b.iter(|| {
                map_indexed(exec, 10_000, |r| {
                    frobenius_sq(&sample_scaled_block(dims, derive_replica_seed(Seed::new(1), r as u64)))
                })
            })
        });
    }
    group.finish();
}

fn experiments(c: &mut Criterion) {
    let mut group = c.benchmark_group("experiments");
    group.sample_size(10);
    let mdp = Schedule::new(vec![100, 200, 300], 0.5, 20_000, Seed::new(1))
        .unwrap()
        .with_beta(0.25)
        .unwrap();
    let conc = Schedule::new(vec![1000, 10_000], 0.5, 5_000, Seed::new(1))
        .unwrap()
        .with_block(2, 2)
        .unwrap();
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("mdp_block", name), |b| {
            b.iter(|| run_mdp_block(1.0, 2, 2, &mdp, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("concentration", name), |b| {
            b.iter(|| run_concentration(&conc, 0.2, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, block_draws, experiments);
criterion_main!(benches);
