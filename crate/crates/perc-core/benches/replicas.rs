//! Parallel vs sequential replica folds on the core sampling kernels.
//!
//! Both drivers produce identical accumulators by contract; this suite
//! measures what the rayon path (`parallel` feature, on by default) buys
//! over the sequential fallback on the folds the estimators actually run:
//! filling a critical configuration, labeling its clusters, and counting
//! boundary reach. Built without the feature, `mc_fold` degrades to the
//! sequential driver and the two sides of each comparison coincide.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use perc_core::cluster::{boundary_touch_count_in, label_clusters_in};
use perc_core::exec::{mc_fold, mc_fold_seq};
use perc_core::lattice::{Region, Sampler};
use perc_core::Configuration;

fn sample_only(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample-only");
    for (n, replicas) in [(16i64, 1024u64), (32, 256), (64, 64)] {
        let sampler = Sampler::new(Region::Box { n }, 0.5, 42).unwrap();
        let init = || 0u64;
        let step = |acc: &mut u64, _: u64, config: &Configuration| {
            *acc += config.open_count() as u64;
        };
        let merge = |a: u64, b: u64| a + b;

        group.throughput(Throughput::Elements(replicas));
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| mc_fold(&sampler, 0..replicas, init, step, merge))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| mc_fold_seq(&sampler, 0..replicas, init, step, merge))
        });
    }
    group.finish();
}

fn largest_cluster_fold(c: &mut Criterion) {
    let mut group = c.benchmark_group("largest-cluster-fold");
    for (n, replicas) in [(16i64, 512u64), (32, 128), (64, 32)] {
        let window = Region::Box { n };
        let sampler = Sampler::new(window.clone(), 0.5, 42).unwrap();
        let init = || (0u64, 0u64);
        let step = |acc: &mut (u64, u64), _: u64, config: &Configuration| {
            let m = label_clusters_in(config, &window).max_cluster_size().unwrap() as u64;
            acc.0 += m;
            acc.1 = acc.1.max(m);
        };
        let merge = |a: (u64, u64), b: (u64, u64)| (a.0 + b.0, a.1.max(b.1));

        group.throughput(Throughput::Elements(replicas));
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| mc_fold(&sampler, 0..replicas, init, step, merge))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| mc_fold_seq(&sampler, 0..replicas, init, step, merge))
        });
    }
    group.finish();
}

fn boundary_reach_fold(c: &mut Criterion) {
    let mut group = c.benchmark_group("boundary-reach-fold");
    for (n, replicas) in [(16i64, 512u64), (32, 128), (64, 32)] {
        let window = Region::Box { n };
        let sampler = Sampler::new(window.clone(), 0.5, 42).unwrap();
        let init = || 0u64;
        let step = |acc: &mut u64, _: u64, config: &Configuration| {
            *acc += boundary_touch_count_in(config, &window) as u64;
        };
        let merge = |a: u64, b: u64| a + b;

        group.throughput(Throughput::Elements(replicas));
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| mc_fold(&sampler, 0..replicas, init, step, merge))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| mc_fold_seq(&sampler, 0..replicas, init, step, merge))
        });
    }
    group.finish();
}

criterion_group!(benches, sample_only, largest_cluster_fold, boundary_reach_fold);
criterion_main!(benches);
