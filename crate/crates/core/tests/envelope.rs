use hollowlink_core::coexistence::*;
use hollowlink_core::config::preset;
use hollowlink_core::link::*;
use proptest::prelude::*;

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + h * i as f64)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// Trapezoid at n and 2n steps combined by one Richardson step.
fn integrate(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, n: usize) -> f64 {
    let t1 = trapezoid(f, a, b, n);
    let t2 = trapezoid(f, a, b, 2 * n);
    (4.0 * t2 - t1) / 3.0
}

fn link(length_km: f64, atten_db_per_km: f64) -> FiberLink {
    FiberLink {
        length_km,
        atten_db_per_km,
        gvd_ps_nm_km: 0.0,
        rho_fwd_cps_mw_km: 1200.0,
        rho_bwd_cps_mw_km: 2000.0,
        insertion_loss_db: 0.0,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn sprs_rates_match_numeric_integration() {
    let carrier = ClassicalCarrier {
        power_fwd_mw: 1.5,
        power_bwd_mw: 0.7,
        wavelength_nm: 1550.0,
    };
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let l = 5.0 + 30.0 * i as f64;
            let db = 0.01 + 0.03 * j as f64;
            let fiber = link(l, db);
            let a = db * std::f64::consts::LN_10 / 10.0;
            // pump decays to z, the scattered photon decays over the rest
            let fwd = |z: f64| (-a * z).exp() * (-a * (l - z)).exp();
            let bwd = |z: f64| (-a * z).exp() * (-a * z).exp();
            let f_num = 1200.0 * 1.5 * integrate(fwd, 0.0, l, 20_000);
            let b_num = 2000.0 * 0.7 * integrate(bwd, 0.0, l, 20_000);
            worst = worst
                .max(rel(forward_sprs_rate(&fiber, &carrier), f_num))
                .max(rel(backward_sprs_rate(&fiber, &carrier), b_num));
        }
    }
    assert!(worst < 1e-9, "worst relative error {worst}");
}

#[test]
fn transmittance_and_broadening() {
    let mut f = link(100.0, 0.17);
    f.insertion_loss_db = 2.0;
    assert!(rel(channel_transmittance(&f), 10f64.powf(-1.9)) < 1e-12);
    f.gvd_ps_nm_km = -3.7;
    assert!(rel(dispersion_broadening(&f, 1.0), 370.0) < 1e-12);
    let a = 0.17 * std::f64::consts::LN_10 / 10.0;
    let expect = (1.0 - (-2.0 * a * 100.0f64).exp()) / (2.0 * a);
    assert!(rel(f.backward_effective_length_km(), expect) < 1e-12);
    // the short-span series branch joins the closed form
    let tiny = link(1e-7, 0.17);
    assert!(rel(tiny.backward_effective_length_km(), 1e-7) < 1e-7);
}

fn base() -> CoexistenceScenario {
    preset("paper-54km-scan").unwrap().load().unwrap().scenario
}

proptest! {
    #[test]
    fn car_decreases_with_power(l in 1.0f64..250.0, p in 0.05f64..10.0, dp in 0.01f64..5.0) {
        let s = base().with_length(l);
        prop_assert!(car(&s.with_power(p + dp)).unwrap() < car(&s.with_power(p)).unwrap());
    }

    #[test]
    fn car_decreases_with_length(l in 0.0f64..250.0, dl in 0.5f64..50.0, p in 0.0f64..5.0) {
        let s = base().with_power(p);
        prop_assert!(car(&s.with_length(l + dl)).unwrap() < car(&s.with_length(l)).unwrap());
    }

    #[test]
    fn accidentals_scale_with_window(w in 10.0f64..1e5, k in 0.1f64..10.0) {
        let s = base();
        prop_assert!(rel(accidental_rate(&s.with_window(w * k)), k * accidental_rate(&s.with_window(w))) < 1e-12);
    }

    #[test]
    fn singles_are_bounded_by_the_true_rates(l in 0.0f64..300.0, p in 0.0f64..20.0, rate in 0.0f64..1e8) {
        let mut s = base().with_length(l).with_power(p);
        s.source.pair_rate_cps = rate;
        let r = singles_rates(&s);
        prop_assert!(r.local_measured <= r.local_true && r.remote_measured <= r.remote_true);
        prop_assert!(r.local_duty() > 0.0 && r.local_duty() <= 1.0);
        let cap = 1e9 / s.det_remote.dead_time_ns;
        prop_assert!(r.remote_measured < cap);
        prop_assert!(correlated_accidental_rate(&s) <= accidental_rate(&s));
        prop_assert!(correlated_accidental_rate(&s) >= 0.0);
    }

    #[test]
    fn max_distance_shrinks_with_power(p in 0.1f64..5.0, dp in 0.5f64..5.0) {
        let s = base();
        let thr = 5.0;
        let near = max_distance(&s.with_power(p), thr, 400.0).unwrap();
        let far = max_distance(&s.with_power(p + dp), thr, 400.0).unwrap();
        prop_assert!(far.distance_km <= near.distance_km);
    }

    #[test]
    fn lower_threshold_reaches_further(t in 1.5f64..50.0, k in 1.1f64..3.0) {
        let s = base();
        let a = max_distance(&s, t * k, 500.0).unwrap();
        let b = max_distance(&s, t, 500.0).unwrap();
        prop_assert!(b.distance_km >= a.distance_km);
    }

    #[test]
    fn halving_a_wide_window_doubles_car(w in 3000.0f64..50_000.0) {
        let s = base();
        prop_assume!(peak_fraction(w / 2.0, s.peak_sigma_ps()) >= 0.999);
        let ratio = car(&s.with_window(w / 2.0)).unwrap() / car(&s.with_window(w)).unwrap();
        prop_assert!((ratio / 2.0 - 1.0).abs() < 0.005, "{}", ratio);
    }

    #[test]
    fn max_distance_shrinks_with_dark_counts(dark in 0.0f64..2e4, extra in 100.0f64..2e4) {
        let mut s = base();
        s.det_remote.dark_rate_cps = dark;
        let quiet = max_distance(&s, 5.0, 400.0).unwrap();
        s.det_remote.dark_rate_cps = dark + extra;
        let noisy = max_distance(&s, 5.0, 400.0).unwrap();
        prop_assert!(noisy.distance_km <= quiet.distance_km);
    }

    #[test]
    fn reversal_is_an_involution(pf in 0.0f64..5.0, pb in 0.0f64..5.0) {
        let mut s = base();
        s.carrier.power_fwd_mw = pf;
        s.carrier.power_bwd_mw = pb;
        prop_assert_eq!(s.reversed().reversed(), s);
    }
}

#[test]
fn grid_is_the_cartesian_product_of_scans() {
    let s = base();
    let lengths = linspace(0.0, 200.0, 5);
    let powers = linspace(0.5, 3.0, 6);
    let g = grid(&s, &lengths, &powers).unwrap();
    for (i, &l) in lengths.iter().enumerate() {
        let row = scan_power(&s.with_length(l), 0.5, 3.0, 6).unwrap();
        assert_eq!(&g[i * 6..(i + 1) * 6], &row[..]);
    }
}

#[test]
fn max_distance_lands_on_the_threshold_crossing() {
    let s = base();
    for target in [30.0, 80.0, 160.0] {
        let thr = threshold_for_distance(&s, target).unwrap();
        let d = max_distance(&s, thr, 600.0).unwrap();
        assert!((d.distance_km - target).abs() <= DISTANCE_RESOLUTION_KM, "{target}: {d:?}");
        assert!(car(&s.with_length(d.distance_km)).unwrap() >= thr);
    }
}
