use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fbd_bench::{data_interferograms, experiment, random_sequence};
use fbd_core::fbd::PhaseProblem;
use fbd_core::seqcore::{convolve_direct, convolve_fft, xcorr};
use fbd_core::{fibd, AltMinConfig, HomotopySchedule, Weight};

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolve");
    for len in [32, 128, 512, 2048] {
        let a = random_sequence(len, 1);
        let b = random_sequence(len, 2);
        group.bench_with_input(BenchmarkId::new("direct", len), &len, |bench, _| {
            bench.iter(|| convolve_direct(black_box(&a), black_box(&b)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fft", len), &len, |bench, _| {
            bench.iter(|| convolve_fft(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();

    let a = random_sequence(401, 3);
    let b = random_sequence(401, 4);
    c.bench_function("xcorr/401/maxlag 400", |bench| {
        bench.iter(|| xcorr(black_box(&a), black_box(&b), 400).unwrap())
    });
}

fn interferometric(c: &mut Criterion) {
    let e = experiment(20);
    let dij = data_interferograms(&e);
    let schedule = HomotopySchedule::new(vec![Weight::Infinite]).unwrap();
    let cfg = AltMinConfig {
        max_outer_iters: 1,
        line_search: false,
        ..AltMinConfig::default()
    };
    let mut group = c.benchmark_group("fibd");
    group.sample_size(10);
    group.bench_function("one iteration, nr 20, T 400", |bench| {
        bench.iter(|| fibd(black_box(&dij), e.spec.tau, &schedule, &cfg, 1).unwrap())
    });
    group.finish();
}

fn phase(c: &mut Criterion) {
    let e = experiment(20);
    let gij = e.truth_interferograms();
    let start: Vec<Vec<f64>> = (0..e.spec.nr)
        .map(|k| random_sequence(e.spec.tau + 1, 10 + k as u64).into_samples())
        .collect();
    let mut group = c.benchmark_group("phase retrieval");
    group.sample_size(10);
    group.bench_function("10 LM steps, nr 20, tau 30", |bench| {
        bench.iter(|| {
            let mut p = PhaseProblem::lspr(black_box(&gij), start.clone());
            p.solve(1e-300, 10).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, convolution, interferometric, phase);
criterion_main!(benches);
