use hollowlink_core::coincidence::*;
use hollowlink_core::config::preset;
use hollowlink_core::sim::{inject_poisson_noise, simulate_direction, Direction, SimRun};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every pair, every bin: a lag belongs to bin k when
/// `left_k <= lag < left_k + w`, with the last bin closed on the right.
/// Edges are compared in doubled units so half-picosecond edges are exact.
fn brute_force(a: &[i64], b: &[i64], w: i64, range: i64, center: i64) -> Vec<u64> {
    let n = ((range + w - 1) / w) as usize;
    let span = n as i64 * w;
    let left2 = 2 * center - span;
    let mut counts = vec![0u64; n];
    for &ta in a {
        for &tb in b {
            let lag2 = 2 * (tb - ta);
            for (k, c) in counts.iter_mut().enumerate() {
                let lo = left2 + 2 * w * k as i64;
                let hi = lo + 2 * w;
                if lag2 >= lo && (lag2 < hi || (k == n - 1 && lag2 == hi)) {
                    *c += 1;
                }
            }
        }
    }
    counts
}

fn sorted(mut v: Vec<i64>) -> Vec<i64> {
    v.sort_unstable();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn histogram_equals_brute_force(
        a in prop::collection::vec(-5_000i64..5_000, 0..1000),
        b in prop::collection::vec(-5_000i64..5_000, 0..1000),
        w in 1i64..400,
        range in 1i64..6_000,
        center in -2_000i64..2_000,
    ) {
        let (a, b) = (sorted(a), sorted(b));
        let h = cross_correlate_tags(&a, &b, w, range, center).unwrap();
        prop_assert_eq!(h.counts, brute_force(&a, &b, w, range, center));
    }
}

proptest! {
    #[test]
    fn odd_bins_mirror_under_stream_swap(
        a in prop::collection::vec(0i64..100_000, 1..300),
        b in prop::collection::vec(0i64..100_000, 1..300),
        half_w in 0i64..50,
        half_n in 1i64..40,
    ) {
        let (a, b) = (sorted(a), sorted(b));
        let w = 2 * half_w + 1;
        let n = 2 * half_n + 1;
        let ab = cross_correlate_tags(&a, &b, w, n * w, 0).unwrap();
        let mut ba = cross_correlate_tags(&b, &a, w, n * w, 0).unwrap().counts;
        ba.reverse();
        prop_assert_eq!(ab.counts, ba);
    }

    #[test]
    fn merging_bins_preserves_counts(
        a in prop::collection::vec(0i64..50_000, 1..300),
        b in prop::collection::vec(0i64..50_000, 1..300),
        w in 1i64..50,
        n in 1i64..60,
        k in 2i64..5,
    ) {
        let (a, b) = (sorted(a), sorted(b));
        let fine = cross_correlate_tags(&a, &b, w, n * k * w, 0).unwrap();
        let coarse = cross_correlate_tags(&a, &b, k * w, n * k * w, 0).unwrap();
        let merged: Vec<u64> = fine.counts.chunks(k as usize).map(|c| c.iter().sum()).collect();
        prop_assert_eq!(merged, coarse.counts);
    }
}

#[test]
fn independent_streams_give_a_flat_histogram() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let t = 20_000_000_000_000i64;
    let a = inject_poisson_noise(2e4, 0, t, &mut rng);
    let b = inject_poisson_noise(3e4, 0, t, &mut rng);
    let w = 1001;
    let h = cross_correlate_tags(&a, &b, w, 401 * w, 0).unwrap();
    let expect = a.len() as f64 * b.len() as f64 * w as f64 / t as f64;
    let n = h.n_bins() as f64;
    let mean = h.total() as f64 / n;
    assert!((mean - expect).abs() < 3.0 * (expect / n).sqrt(), "{mean} vs {expect}");
    let dispersion: f64 = h.counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum::<f64>() / n;
    assert!((dispersion - 1.0).abs() < 0.25, "{dispersion}");
    assert!(matches!(fit_peak(&h), Err(CoincidenceError::NoPeak { .. })));
}

fn short_run(seed: u64, duration_s: f64) -> SimRun {
    let mut run = preset("paper-54km-scan").unwrap().load().unwrap().sim_run(seed).unwrap();
    run.duration_s = duration_s;
    run
}

fn measure(run: &SimRun) -> (f64, DelayEstimate) {
    let st = simulate_direction(run, Direction::AToB, 0, 0, run.duration_ps()).unwrap();
    let truth = run.link_delay_ab_ps as f64;
    let cfg = ExtractConfig::tracking(run.link_delay_ab_ps + 3_000, 100_000);
    (truth, extract_delay(&st.local, &st.remote, &cfg).unwrap())
}

#[test]
fn delay_estimates_are_unbiased_with_honest_errors() {
    let z: Vec<f64> = (0..100)
        .map(|seed| {
            let (truth, est) = measure(&short_run(1000 + seed, 1.0));
            (est.delay_ps - truth) / est.stderr_ps
        })
        .collect();
    let n = z.len() as f64;
    let within2 = z.iter().filter(|v| v.abs() < 2.0).count();
    let within3 = z.iter().filter(|v| v.abs() < 3.0).count();
    let mean = z.iter().sum::<f64>() / n;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(within2 >= 90 && within3 >= 98, "coverage {within2}/{within3}");
    // unbiased to twice the standard error of the mean
    assert!(mean.abs() < 2.0 / n.sqrt(), "mean z {mean}");
    assert!((sd - 1.0).abs() < 0.2, "sd z {sd}");
}

#[test]
fn stderr_shrinks_as_root_duration() {
    let avg = |dur: f64| -> f64 {
        (0..8)
            .map(|s| measure(&short_run(2000 + s, dur)).1.stderr_ps)
            .sum::<f64>()
            / 8.0
    };
    let ratio = avg(0.5) / avg(2.0);
    assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
}

#[test]
fn swapping_streams_negates_the_delay() {
    let run = short_run(5, 1.0);
    let st = simulate_direction(&run, Direction::AToB, 0, 0, run.duration_ps()).unwrap();
    let d = run.link_delay_ab_ps;
    let fwd = extract_delay(&st.local, &st.remote, &ExtractConfig::tracking(d, 50_000)).unwrap();
    let back = extract_delay(&st.remote, &st.local, &ExtractConfig::tracking(-d, 50_000)).unwrap();
    assert!((fwd.delay_ps + back.delay_ps).abs() < 1e-6, "{} {}", fwd.delay_ps, back.delay_ps);
    assert!((fwd.stderr_ps - back.stderr_ps).abs() < 1e-6);
}

#[test]
fn car_estimate_tracks_the_peak() {
    let run = short_run(8, 2.0);
    let (_, est) = measure(&run);
    let fit = est.fit.expect("resolved peak");
    let car = estimate_car(&est.histogram, &fit, run.scenario.window_ps).unwrap();
    let model = hollowlink_core::coexistence::correlated_car(&run.scenario).unwrap();
    assert!((car.car - model).abs() < 4.0 * car.stderr, "{} +- {} vs {model}", car.car, car.stderr);
}
