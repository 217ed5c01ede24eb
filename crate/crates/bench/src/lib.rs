//! Fixtures shared by the benchmarks.

use hollowlink_core::config::preset;
use hollowlink_core::sim::{simulate_direction, DirectionStreams, Direction, SimRun};
use hollowlink_core::stability::{synthesize_noise, NoiseKind, PhaseSeries};
use hollowlink_core::CoexistenceScenario;

pub fn scan_scenario() -> CoexistenceScenario {
    preset("paper-54km-scan").unwrap().load().unwrap().scenario
}

/// 54 km run of `duration_s` seconds.
pub fn run(duration_s: f64, seed: u64) -> SimRun {
    SimRun::new(scan_scenario(), duration_s, seed)
}

/// The A-to-B streams of [`run`].
pub fn streams(duration_s: f64) -> (SimRun, DirectionStreams) {
    let r = run(duration_s, 1);
    let d = simulate_direction(&r, Direction::AToB, 0, 0, r.duration_ps()).unwrap();
    (r, d)
}

pub fn white_pm(n: usize) -> PhaseSeries {
    synthesize_noise(NoiseKind::WhitePm, 1e-12, 1.0, n, 3).unwrap()
}
