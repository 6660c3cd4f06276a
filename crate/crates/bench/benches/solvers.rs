use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};

use netslice_bench::{full_model, instances};
use netslice_core::formulations::FpVariant;
use netslice_core::lp::{solve_lp, LpConfig};
use netslice_core::milp::MilpConfig;
use netslice_core::{solve_cbd, solve_direct, CbdConfig};

fn lp_relaxation(c: &mut Criterion) {
    let lp = full_model(5, 1).program.relaxation();
    c.bench_function("lp/ns_relaxation_grid20x5", |b| {
        b.iter(|| solve_lp(black_box(&lp), &LpConfig::default()))
    });
}

fn decomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("cbd");
    group.sample_size(10);
    group.measurement_time(Duration::from_secs(10));
    for (name, inst) in instances() {
        for variant in [FpVariant::Fp, FpVariant::FpI, FpVariant::FpII] {
            let cfg = CbdConfig {
                variant,
                time_limit: Some(Duration::from_secs(30)),
                ..Default::default()
            };
            group.bench_function(format!("{name}/{}", variant.name()), |b| {
                b.iter(|| solve_cbd(black_box(&inst), &cfg))
            });
        }
    }
    group.finish();
}

fn direct(c: &mut Criterion) {
    let mut group = c.benchmark_group("direct");
    group.sample_size(10);
    for (name, inst) in instances().into_iter().take(3) {
        group.bench_function(name, |b| {
            b.iter(|| solve_direct(black_box(&inst), &MilpConfig::default()))
        });
    }
    group.finish();
}

criterion_group!(benches, lp_relaxation, decomposition, direct);
criterion_main!(benches);
