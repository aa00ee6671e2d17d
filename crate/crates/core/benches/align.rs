use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use wavemap_core::align::AlignerConfig;
use wavemap_core::dna::encode;
use wavemap_core::dp::{diagonal_affine_dp, scalar_affine_dp, ScoringScheme, SUPPORTED_LANES};
use wavemap_core::index::ReferenceIndex;
use wavemap_core::pipeline::{dispatch_batch, Batch, Executor};
use wavemap_core::sim::{random_reference, simulate_pairs, SimConfig};

fn bench_dispatch(c: &mut Criterion) {
    let reference = random_reference(200_000, 1);
    let index = ReferenceIndex::build(&[("chr", reference.clone())], 8).unwrap();
    let units = simulate_pairs(&reference, &SimConfig { pairs: 1000, ..SimConfig::default() });
    let batch = Batch { batch_id: 0, units };
    let config = AlignerConfig::default();

    let mut group = c.benchmark_group("dispatch");
    group.throughput(Throughput::Elements(batch.read_count() as u64));
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| dispatch_batch(black_box(&batch), &index, &Executor::Sequential, &config).unwrap())
    });
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut counts = vec![1, cores, 4 * cores];
    counts.dedup();
    for workers in counts {
        let executor = Executor::with_workers(workers).unwrap();
        group.bench_with_input(BenchmarkId::new("rayon", workers), &executor, |b, ex| {
            b.iter(|| dispatch_batch(black_box(&batch), &index, ex, &config).unwrap())
        });
    }
    group.finish();
}

fn bench_dp(c: &mut Criterion) {
    let window = random_reference(132, 2);
    let mut read = window[16..116].to_vec();
    read[40] = if read[40] == b'A' { b'C' } else { b'A' };
    read.remove(70);
    let (read, window) = (encode(&read), encode(&window));
    let scoring = ScoringScheme::default();

    let mut group = c.benchmark_group("dp_100x132");
    group.throughput(Throughput::Elements((read.len() * window.len()) as u64));
    group.bench_function("scalar", |b| b.iter(|| scalar_affine_dp(black_box(&read), &window, &scoring).unwrap()));
    for lanes in SUPPORTED_LANES {
        group.bench_with_input(BenchmarkId::new("diagonal", lanes), &lanes, |b, &lanes| {
            b.iter(|| diagonal_affine_dp(black_box(&read), &window, &scoring, lanes).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_dispatch, bench_dp);
criterion_main!(benches);
