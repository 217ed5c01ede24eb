use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hollowlink_bench::{run, scan_scenario, streams, white_pm};
use hollowlink_core::coexistence::{grid, linspace};
use hollowlink_core::coincidence::{cross_correlate, extract_delay, ExtractConfig};
use hollowlink_core::sim::{simulate_direction, Direction};
use hollowlink_core::stability::{adev, octave_factors, tdev};
use std::hint::black_box;

fn coincidence(c: &mut Criterion) {
    let (r, d) = streams(1.0);
    let center = r.link_delay_ab_ps;
    let mut g = c.benchmark_group("coincidence");
    g.sample_size(20);
    g.throughput(Throughput::Elements((d.local.len() + d.remote.len()) as u64));
    g.bench_function("cross_correlate_1s_20ns_25ps", |b| {
        b.iter(|| cross_correlate(black_box(&d.local), black_box(&d.remote), 25, 20_000, center).unwrap())
    });
    g.bench_function("cross_correlate_1s_2us_1ns", |b| {
        b.iter(|| cross_correlate(black_box(&d.local), black_box(&d.remote), 1001, 2_000_000, center).unwrap())
    });
    g.bench_function("extract_delay_tracking_1s", |b| {
        b.iter(|| extract_delay(&d.local, &d.remote, &ExtractConfig::tracking(center, 200_000)).unwrap())
    });
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_direction");
    g.sample_size(10);
    for secs in [0.1, 1.0] {
        let r = run(secs, 2);
        g.bench_with_input(BenchmarkId::from_parameter(secs), &r, |b, r| {
            b.iter(|| simulate_direction(r, Direction::AToB, 0, 0, r.duration_ps()).unwrap())
        });
    }
    g.finish();
}

fn stability(c: &mut Criterion) {
    let mut g = c.benchmark_group("stability");
    g.sample_size(20);
    for n in [10_000usize, 100_000] {
        let s = white_pm(n);
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::new("tdev_octaves", n), &s, |b, s| {
            b.iter(|| tdev(s, &octave_factors(s.len(), 3)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("adev_octaves", n), &s, |b, s| {
            b.iter(|| adev(s, &octave_factors(s.len(), 2)).unwrap())
        });
    }
    g.finish();
}

fn car_grid(c: &mut Criterion) {
    let s = scan_scenario();
    let lengths = linspace(0.0, 300.0, 100);
    let powers = linspace(0.0, 5.0, 100);
    c.bench_function("car_grid_100x100", |b| b.iter(|| grid(&s, black_box(&lengths), black_box(&powers)).unwrap()));
}

criterion_group!(benches, coincidence, simulation, stability, car_grid);
criterion_main!(benches);
