//! Analytical coexistence envelope: singles, true and accidental coincidence
//! rates, coincidence-to-accidental ratio (CAR), and scans over carrier
//! power and fiber length.
//!
//! The A -> B direction is modeled: the local detector sees the idler arm of
//! the pair source at site A, the remote detector sees the signal arm after
//! the fiber plus SpRS noise and its own dark counts. Use
//! [`CoexistenceScenario::reversed`] for B -> A.
//!
//! Dead time enters as a multiplicative duty factor per detector. Because the
//! accidental rate is built from the *registered* singles, the duty factors
//! cancel in the CAR; they still matter for absolute coincidence rates.

use rayon::prelude::*;
use statrs::function::erf::erf;
use thiserror::Error;

use crate::link::{
    self, backward_sprs_rate, channel_transmittance, dead_time_throughput, dispersion_broadening,
    forward_sprs_rate, ClassicalCarrier, DetectorModel, FiberLink, ModelError, FWHM_PER_SIGMA,
};

/// Bisection resolution of [`max_distance`].
pub const DISTANCE_RESOLUTION_KM: f64 = 0.1;

const DISTANCE_SCAN_SEGMENTS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoexistenceError {
    #[error("accidental rate is zero; CAR is unbounded")]
    DegenerateScenario,
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("CAR threshold {threshold} is above the best achievable CAR {best} at zero length")]
    ThresholdAboveBest { threshold: f64, best: f64 },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Entangled pair source shared by both arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSource {
    pub pair_rate_cps: f64,
    /// Collection efficiency of the locally detected idler arm.
    pub arm_eff_local: f64,
    /// Collection efficiency of the signal arm, before the fiber.
    pub arm_eff_remote: f64,
    pub fwhm_bandwidth_nm: f64,
}

impl PairSource {
    pub fn validate(&self) -> Result<(), ModelError> {
        link::non_negative("pair_rate_cps", self.pair_rate_cps)?;
        link::unit_interval("arm_eff_local", self.arm_eff_local)?;
        link::unit_interval("arm_eff_remote", self.arm_eff_remote)?;
        link::non_negative("fwhm_bandwidth_nm", self.fwhm_bandwidth_nm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoexistenceScenario {
    pub link: FiberLink,
    pub carrier: ClassicalCarrier,
    pub source: PairSource,
    pub det_local: DetectorModel,
    pub det_remote: DetectorModel,
    /// Full coincidence window width in ps.
    pub window_ps: f64,
    /// Nonlocal dispersion cancellation removes the fiber broadening.
    pub dcm_engaged: bool,
    /// Detector efficiency the SpRS coefficients were measured with. Noise
    /// rates scale by `det_remote.efficiency / sprs_ref_efficiency`.
    pub sprs_ref_efficiency: f64,
}

impl CoexistenceScenario {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.link.validate()?;
        self.carrier.validate()?;
        self.source.validate()?;
        self.det_local.validate()?;
        self.det_remote.validate()?;
        link::check("window_ps", self.window_ps, self.window_ps > 0.0, "> 0")?;
        link::check(
            "sprs_ref_efficiency",
            self.sprs_ref_efficiency,
            self.sprs_ref_efficiency > 0.0 && self.sprs_ref_efficiency <= 1.0,
            "(0, 1]",
        )
    }

    pub fn with_power(mut self, power_mw: f64) -> Self {
        self.carrier = self.carrier.with_power(power_mw);
        self
    }

    pub fn with_length(mut self, length_km: f64) -> Self {
        self.link.length_km = length_km;
        self
    }

    pub fn with_window(mut self, window_ps: f64) -> Self {
        self.window_ps = window_ps;
        self
    }

    /// The B -> A channel: same hardware, carrier legs swapped.
    pub fn reversed(mut self) -> Self {
        self.carrier = self.carrier.reversed();
        self
    }

    /// Forward launch power, the quantity scans sweep.
    pub fn power_mw(&self) -> f64 {
        self.carrier.power_fwd_mw
    }

    pub fn sprs_scale(&self) -> f64 {
        self.det_remote.efficiency / self.sprs_ref_efficiency
    }

    pub fn transmittance(&self) -> f64 {
        channel_transmittance(&self.link)
    }

    /// Gaussian sigma of the fiber dispersion contribution (0 with DCM).
    pub fn dispersion_sigma_ps(&self) -> f64 {
        if self.dcm_engaged {
            0.0
        } else {
            dispersion_broadening(&self.link, self.source.fwhm_bandwidth_nm) / FWHM_PER_SIGMA
        }
    }

    /// Width of the coincidence peak: jitter of both detectors and
    /// dispersion, in quadrature.
    pub fn peak_sigma_ps(&self) -> f64 {
        let jl = self.det_local.jitter_sigma_ps;
        let jr = self.det_remote.jitter_sigma_ps;
        let d = self.dispersion_sigma_ps();
        (jl * jl + jr * jr + d * d).sqrt()
    }
}

/// Noise contributions at the remote detector, counts/s before dead time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemoteNoise {
    pub forward_sprs_cps: f64,
    pub backward_sprs_cps: f64,
    pub dark_cps: f64,
}

impl RemoteNoise {
    pub fn total(&self) -> f64 {
        self.forward_sprs_cps + self.backward_sprs_cps + self.dark_cps
    }
}

/// Singles rates of both detectors, before (`*_true`) and after dead time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singles {
    pub local_true: f64,
    pub remote_true: f64,
    pub local_measured: f64,
    pub remote_measured: f64,
    /// Pair photons reaching the local detector (before dead time).
    pub local_signal: f64,
    /// Pair photons reaching the remote detector (before dead time).
    pub remote_signal: f64,
    pub remote_noise: RemoteNoise,
}

impl Singles {
    pub fn local_duty(&self) -> f64 {
        duty(self.local_measured, self.local_true)
    }

    pub fn remote_duty(&self) -> f64 {
        duty(self.remote_measured, self.remote_true)
    }
}

fn duty(measured: f64, truth: f64) -> f64 {
    if truth > 0.0 {
        measured / truth
    } else {
        1.0
    }
}

pub fn remote_noise(s: &CoexistenceScenario) -> RemoteNoise {
    let k = s.sprs_scale();
    RemoteNoise {
        forward_sprs_cps: k * forward_sprs_rate(&s.link, &s.carrier),
        backward_sprs_cps: k * backward_sprs_rate(&s.link, &s.carrier),
        dark_cps: s.det_remote.dark_rate_cps,
    }
}

pub fn singles_rates(s: &CoexistenceScenario) -> Singles {
    let src = &s.source;
    let local_signal = src.pair_rate_cps * src.arm_eff_local * s.det_local.efficiency;
    let remote_signal = src.pair_rate_cps * src.arm_eff_remote * s.transmittance() * s.det_remote.efficiency;
    let noise = remote_noise(s);
    let local_true = local_signal + s.det_local.dark_rate_cps;
    let remote_true = remote_signal + noise.total();
    Singles {
        local_true,
        remote_true,
        local_measured: dead_time_throughput(local_true, &s.det_local),
        remote_measured: dead_time_throughput(remote_true, &s.det_remote),
        local_signal,
        remote_signal,
        remote_noise: noise,
    }
}

/// Fraction of a Gaussian peak of width `sigma_peak_ps` inside a centered
/// window of full width `window_ps`.
pub fn peak_fraction(window_ps: f64, sigma_peak_ps: f64) -> f64 {
    if sigma_peak_ps <= 0.0 || window_ps.is_infinite() {
        return if window_ps > 0.0 { 1.0 } else { 0.0 };
    }
    erf(window_ps / (2.0 * std::f64::consts::SQRT_2 * sigma_peak_ps))
}

/// Registered true coincidences per second inside the window.
pub fn true_coincidence_rate(s: &CoexistenceScenario) -> f64 {
    let singles = singles_rates(s);
    let src = &s.source;
    src.pair_rate_cps
        * src.arm_eff_local
        * s.det_local.efficiency
        * src.arm_eff_remote
        * s.det_remote.efficiency
        * s.transmittance()
        * peak_fraction(s.window_ps, s.peak_sigma_ps())
        * singles.local_duty()
        * singles.remote_duty()
}

/// Uncorrelated coincidences per second inside the window.
pub fn accidental_rate(s: &CoexistenceScenario) -> f64 {
    let singles = singles_rates(s);
    singles.local_measured * singles.remote_measured * s.window_ps * 1e-12
}

/// `integral of Phi(x / sigma) dx`, with `Phi` the standard normal CDF.
fn phi_integral(x: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return x.max(0.0);
    }
    let z = x / sigma;
    let cdf = 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    x * cdf + sigma * pdf
}

/// Window integral of `P(lag - eps in (lo, hi))`, with `eps` Gaussian of
/// width `sigma`; lag spans the centered window of full width `w`.
fn window_overlap_ps(w: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let g = |c: f64| phi_integral(0.5 * w + c, sigma) - phi_integral(-0.5 * w + c, sigma);
    g(-lo) - g(-hi)
}

/// Accidentals per second missing from the window because of dead time.
///
/// A registered local tag implies no idler reached the local detector in the
/// preceding dead time, which removes the partner photons of those pairs
/// from lags just before the peak. A registered remote partner likewise
/// blinds the remote detector for lags just after it. Both are about 1-3%
/// of the accidentals in the paper scenarios and are left out of
/// [`accidental_rate`].
pub fn dead_time_accidental_deficit(s: &CoexistenceScenario) -> f64 {
    let singles = singles_rates(s);
    let src = &s.source;
    let sigma = s.peak_sigma_ps();
    let eta_l = src.arm_eff_local * s.det_local.efficiency;
    let eta_r = src.arm_eff_remote * s.transmittance() * s.det_remote.efficiency;
    let d_r = singles.remote_duty();
    let tau_l = s.det_local.dead_time_ns * 1e3;
    let tau_r = s.det_remote.dead_time_ns * 1e3;
    let local = src.pair_rate_cps * eta_l * eta_r * d_r * window_overlap_ps(s.window_ps, sigma, -tau_l, 0.0);
    let remote = singles.remote_measured * eta_r * d_r * window_overlap_ps(s.window_ps, sigma, 0.0, tau_r);
    singles.local_measured * (local + remote) * 1e-12
}

/// [`accidental_rate`] less [`dead_time_accidental_deficit`].
pub fn correlated_accidental_rate(s: &CoexistenceScenario) -> f64 {
    (accidental_rate(s) - dead_time_accidental_deficit(s)).max(0.0)
}

/// CAR against [`correlated_accidental_rate`].
pub fn correlated_car(s: &CoexistenceScenario) -> Result<f64, CoexistenceError> {
    let acc = correlated_accidental_rate(s);
    if acc > 0.0 {
        Ok(true_coincidence_rate(s) / acc)
    } else {
        Err(CoexistenceError::DegenerateScenario)
    }
}

pub fn car(s: &CoexistenceScenario) -> Result<f64, CoexistenceError> {
    let acc = accidental_rate(s);
    if acc > 0.0 {
        Ok(true_coincidence_rate(s) / acc)
    } else {
        Err(CoexistenceError::DegenerateScenario)
    }
}

/// CAR with the unbounded case mapped to `+inf`, for tabulation.
pub fn car_or_inf(s: &CoexistenceScenario) -> f64 {
    car(s).unwrap_or(f64::INFINITY)
}

/// One cell of a scan or grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarPoint {
    pub length_km: f64,
    pub power_mw: f64,
    /// `+inf` when the accidental rate vanishes.
    pub car: f64,
}

fn evaluate(s: &CoexistenceScenario) -> CarPoint {
    CarPoint {
        length_km: s.link.length_km,
        power_mw: s.power_mw(),
        car: car_or_inf(s),
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

fn check_range(what: &str, lo: f64, hi: f64, n: usize) -> Result<(), CoexistenceError> {
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi && n >= 2) {
        return Err(CoexistenceError::InvalidRange(format!(
            "{what}: need 0 <= min < max and at least 2 points, got {lo}..{hi} x {n}"
        )));
    }
    Ok(())
}

pub fn scan_power(
    s: &CoexistenceScenario,
    p_min_mw: f64,
    p_max_mw: f64,
    n_points: usize,
) -> Result<Vec<CarPoint>, CoexistenceError> {
    check_range("power", p_min_mw, p_max_mw, n_points)?;
    Ok(linspace(p_min_mw, p_max_mw, n_points)
        .into_par_iter()
        .map(|p| evaluate(&s.with_power(p)))
        .collect())
}

pub fn scan_length(
    s: &CoexistenceScenario,
    l_min_km: f64,
    l_max_km: f64,
    n_points: usize,
) -> Result<Vec<CarPoint>, CoexistenceError> {
    check_range("length", l_min_km, l_max_km, n_points)?;
    Ok(linspace(l_min_km, l_max_km, n_points)
        .into_par_iter()
        .map(|l| evaluate(&s.with_length(l)))
        .collect())
}

/// CAR over a length x power grid, row-major by length. Each cell is an
/// independent evaluation, so the result does not depend on scheduling.
pub fn grid(
    s: &CoexistenceScenario,
    lengths_km: &[f64],
    powers_mw: &[f64],
) -> Result<Vec<CarPoint>, CoexistenceError> {
    if lengths_km.is_empty() || powers_mw.is_empty() {
        return Err(CoexistenceError::InvalidRange("empty grid axis".into()));
    }
    if lengths_km.iter().chain(powers_mw).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(CoexistenceError::InvalidRange("grid axes must be finite and >= 0".into()));
    }
    let cells: Vec<(f64, f64)> = lengths_km
        .iter()
        .flat_map(|&l| powers_mw.iter().map(move |&p| (l, p)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(l, p)| evaluate(&s.with_length(l).with_power(p)))
        .collect())
}

/// Result of [`max_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxDistance {
    pub distance_km: f64,
    /// CAR stayed above threshold up to the search limit; `distance_km` is
    /// that limit, not a crossing.
    pub not_reachable: bool,
}

/// Largest length up to `l_hi_km` at which CAR still meets `car_threshold`.
pub fn max_distance(
    s: &CoexistenceScenario,
    car_threshold: f64,
    l_hi_km: f64,
) -> Result<MaxDistance, CoexistenceError> {
    if !(car_threshold > 0.0) {
        return Err(CoexistenceError::InvalidRange(format!(
            "CAR threshold must be > 0, got {car_threshold}"
        )));
    }
    if !(l_hi_km > 0.0 && l_hi_km.is_finite()) {
        return Err(CoexistenceError::InvalidRange(format!("l_hi must be > 0, got {l_hi_km}")));
    }
    let ok = |l: f64| car_or_inf(&s.with_length(l)) >= car_threshold;
    let best = car_or_inf(&s.with_length(0.0));
    if best < car_threshold {
        return Err(CoexistenceError::ThresholdAboveBest {
            threshold: car_threshold,
            best,
        });
    }
    let grid = linspace(0.0, l_hi_km, DISTANCE_SCAN_SEGMENTS + 1);
    let last_ok = grid
        .iter()
        .rposition(|&l| ok(l))
        .expect("zero length satisfies the threshold");
    if last_ok == DISTANCE_SCAN_SEGMENTS {
        return Ok(MaxDistance {
            distance_km: l_hi_km,
            not_reachable: true,
        });
    }
    let (mut lo, mut hi) = (grid[last_ok], grid[last_ok + 1]);
    while hi - lo > DISTANCE_RESOLUTION_KM {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MaxDistance {
        distance_km: lo,
        not_reachable: false,
    })
}

/// Threshold that makes [`max_distance`] land on `distance_km` (for a CAR
/// that decreases with length).
pub fn threshold_for_distance(s: &CoexistenceScenario, distance_km: f64) -> Result<f64, CoexistenceError> {
    car(&s.with_length(distance_km))
}

/// Modeling assumption varied when projecting reach to other powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionToggle {
    /// The scenario as given.
    AsConfigured,
    /// Carrier power launched in both directions.
    Bidirectional,
    /// Carrier power only co-propagating with the photons.
    ForwardOnly,
    /// SpRS coefficients used as detected rates, without rescaling to the
    /// remote detector efficiency.
    NoRescaling,
}

impl ProjectionToggle {
    pub const ALL: [ProjectionToggle; 4] = [
        ProjectionToggle::AsConfigured,
        ProjectionToggle::Bidirectional,
        ProjectionToggle::ForwardOnly,
        ProjectionToggle::NoRescaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProjectionToggle::AsConfigured => "as-configured",
            ProjectionToggle::Bidirectional => "bidirectional-carrier",
            ProjectionToggle::ForwardOnly => "forward-only-carrier",
            ProjectionToggle::NoRescaling => "no-coefficient-rescaling",
        }
    }

    pub fn apply(self, s: &CoexistenceScenario) -> CoexistenceScenario {
        let mut t = *s;
        let p = s.power_mw();
        match self {
            ProjectionToggle::AsConfigured => {}
            ProjectionToggle::Bidirectional => {
                t.carrier.power_fwd_mw = p;
                t.carrier.power_bwd_mw = p;
            }
            ProjectionToggle::ForwardOnly => {
                t.carrier.power_fwd_mw = p;
                t.carrier.power_bwd_mw = 0.0;
            }
            ProjectionToggle::NoRescaling => t.sprs_ref_efficiency = s.det_remote.efficiency.max(f64::MIN_POSITIVE),
        }
        t
    }
}

/// Reach at `power_mw` with the threshold calibrated so the reach at
/// `cal_power_mw` is `cal_distance_km`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub toggle: ProjectionToggle,
    pub threshold: f64,
    pub reach: MaxDistance,
}

pub fn project_reach(
    s: &CoexistenceScenario,
    toggle: ProjectionToggle,
    cal_power_mw: f64,
    cal_distance_km: f64,
    power_mw: f64,
    l_hi_km: f64,
) -> Result<Projection, CoexistenceError> {
    let t = toggle.apply(s);
    let threshold = threshold_for_distance(&t.with_power(cal_power_mw), cal_distance_km)?;
    let reach = max_distance(&t.with_power(power_mw), threshold, l_hi_km)?;
    Ok(Projection {
        toggle,
        threshold,
        reach,
    })
}

/// Predicted centroid standard error (ps) of one delay measurement over
/// `interval_s`, from the Fisher information of a Gaussian peak on a flat
/// accidental floor.
pub fn predicted_delay_stderr_ps(s: &CoexistenceScenario, interval_s: f64) -> f64 {
    let sigma = s.peak_sigma_ps();
    let frac = peak_fraction(s.window_ps, sigma);
    let n_peak = if frac > 0.0 {
        true_coincidence_rate(s) / frac * interval_s
    } else {
        0.0
    };
    if n_peak <= 0.0 {
        return f64::INFINITY;
    }
    if sigma <= 0.0 {
        return 0.0;
    }
    let singles = singles_rates(s);
    // accidental density per ps of lag
    let floor = singles.local_measured * singles.remote_measured * 1e-12 * interval_s;
    let steps = 8000;
    let half = 10.0 * sigma;
    let dx = 2.0 * half / steps as f64;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let info: f64 = (0..=steps)
        .map(|i| {
            let x = -half + i as f64 * dx;
            let g = norm * (-0.5 * x * x / (sigma * sigma)).exp();
            let dg = -x / (sigma * sigma) * g;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * (n_peak * dg).powi(2) / (n_peak * g + floor)
        })
        .sum::<f64>()
        * dx;
    1.0 / info.sqrt()
}

/// Predicted two-way clock-offset standard error per measurement interval:
/// half the quadrature sum of both directions.
pub fn predicted_offset_stderr_ps(s: &CoexistenceScenario, interval_s: f64) -> f64 {
    let ab = predicted_delay_stderr_ps(s, interval_s);
    let ba = predicted_delay_stderr_ps(&s.reversed(), interval_s);
    0.5 * (ab * ab + ba * ba).sqrt()
}

/// Predicted TDEV at averaging time `tau_s` for a white-phase offset series
/// sampled every `interval_s`: `sigma_x * sqrt(interval / tau)`.
pub fn predicted_tdev_ps(s: &CoexistenceScenario, interval_s: f64, tau_s: f64) -> f64 {
    predicted_offset_stderr_ps(s, interval_s) * (interval_s / tau_s).sqrt()
}

/// Pair rate at which [`predicted_tdev_ps`] reaches `target_tdev_ps`. Takes
/// the lowest rate that does, since saturation makes TDEV non-monotone at
/// very high brightness.
pub fn calibrate_pair_rate(
    s: &CoexistenceScenario,
    target_tdev_ps: f64,
    interval_s: f64,
    tau_s: f64,
) -> Result<f64, CoexistenceError> {
    let tdev_at = |rate: f64| {
        let mut t = *s;
        t.source.pair_rate_cps = rate;
        predicted_tdev_ps(&t, interval_s, tau_s)
    };
    let grid: Vec<f64> = (0..=160).map(|i| 10f64.powf(1.0 + i as f64 * 0.05)).collect();
    let upper = grid
        .iter()
        .position(|&r| tdev_at(r) <= target_tdev_ps)
        .ok_or_else(|| CoexistenceError::Calibration(format!("TDEV {target_tdev_ps} ps not reachable")))?;
    if upper == 0 {
        return Err(CoexistenceError::Calibration("target met below 10 pairs/s".into()));
    }
    let (mut lo, mut hi) = (grid[upper - 1].ln(), grid[upper].ln());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tdev_at(mid.exp()) <= target_tdev_ps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> CoexistenceScenario {
        CoexistenceScenario {
            link: FiberLink {
                length_km: 54.0,
                atten_db_per_km: 0.17,
                gvd_ps_nm_km: 3.7,
                rho_fwd_cps_mw_km: 1200.0,
                rho_bwd_cps_mw_km: 2000.0,
                insertion_loss_db: 0.0,
            },
            carrier: ClassicalCarrier {
                power_fwd_mw: 1.0,
                power_bwd_mw: 1.0,
                wavelength_nm: 1550.07,
            },
            source: PairSource {
                pair_rate_cps: 5e5,
                arm_eff_local: 0.5,
                arm_eff_remote: 0.5,
                fwhm_bandwidth_nm: 1.0,
            },
            det_local: DetectorModel {
                efficiency: 0.25,
                dark_rate_cps: 5000.0,
                jitter_sigma_ps: 200.0,
                dead_time_ns: 1000.0,
            },
            det_remote: DetectorModel {
                efficiency: 0.25,
                dark_rate_cps: 5000.0,
                jitter_sigma_ps: 200.0,
                dead_time_ns: 1000.0,
            },
            window_ps: 2000.0,
            dcm_engaged: false,
            sprs_ref_efficiency: 0.25,
        }
    }

    #[test]
    fn dark_only_singles() {
        let mut s = scenario().with_power(0.0);
        s.source.pair_rate_cps = 0.0;
        s.det_local.dead_time_ns = 0.0;
        s.det_remote.dead_time_ns = 0.0;
        let r = singles_rates(&s);
        assert_eq!((r.local_measured, r.remote_measured), (5000.0, 5000.0));
    }

    #[test]
    fn remote_singles_contain_noise_terms() {
        let r = singles_rates(&scenario());
        assert!((r.remote_noise.forward_sprs_cps - 7830.0).abs() < 10.0);
        assert!((r.remote_noise.backward_sprs_cps - 25_200.0).abs() < 50.0);
        let expect = r.remote_signal + r.remote_noise.total();
        assert!((r.remote_true - expect).abs() < 1e-9);
    }

    #[test]
    fn peak_fraction_limits() {
        assert_eq!(peak_fraction(f64::INFINITY, 300.0), 1.0);
        assert_eq!(peak_fraction(10.0, 0.0), 1.0);
        let f = peak_fraction(FWHM_PER_SIGMA * 100.0, 100.0);
        assert!((f - 0.7610).abs() < 1e-3, "{f}");
    }

    #[test]
    fn lossless_true_rate_is_pair_rate() {
        let mut s = scenario();
        s.link.length_km = 0.0;
        s.link.insertion_loss_db = 0.0;
        s.source.arm_eff_local = 1.0;
        s.source.arm_eff_remote = 1.0;
        for d in [&mut s.det_local, &mut s.det_remote] {
            d.efficiency = 1.0;
            d.jitter_sigma_ps = 0.0;
            d.dead_time_ns = 0.0;
        }
        s.sprs_ref_efficiency = 1.0;
        assert!((true_coincidence_rate(&s) - 5e5).abs() < 1e-6);
        s.source.pair_rate_cps = 0.0;
        assert_eq!(true_coincidence_rate(&s), 0.0);
    }

    #[test]
    fn accidentals_closed_form_and_linear() {
        let mut s = scenario();
        s.source.pair_rate_cps = 0.0;
        s.carrier = s.carrier.with_power(0.0);
        s.det_local.dark_rate_cps = 1e4;
        s.det_remote.dark_rate_cps = 1e4;
        s.det_local.dead_time_ns = 0.0;
        s.det_remote.dead_time_ns = 0.0;
        s.window_ps = 1000.0;
        assert!((accidental_rate(&s) - 0.1).abs() < 1e-12);
        let half = accidental_rate(&s.with_window(500.0));
        assert_eq!(half * 2.0, accidental_rate(&s));
        assert!(accidental_rate(&s.with_window(1e-300)) < 1e-200);
    }

    #[test]
    fn degenerate_car_is_an_error() {
        let mut s = scenario().with_power(0.0);
        s.det_remote.dark_rate_cps = 0.0;
        s.source.pair_rate_cps = 0.0;
        assert_eq!(car(&s), Err(CoexistenceError::DegenerateScenario));
        assert_eq!(car_or_inf(&s), f64::INFINITY);
    }

    #[test]
    fn car_above_ten_at_three_milliwatts() {
        let s = scenario().with_power(3.0);
        assert!(car(&s).unwrap() > 10.0);
    }

    #[test]
    fn power_scan_is_monotone_and_consistent() {
        let s = scenario();
        let pts = scan_power(&s, 0.5, 3.0, 6).unwrap();
        assert_eq!(pts.len(), 6);
        for w in pts.windows(2) {
            assert!(w[1].car < w[0].car);
        }
        for p in &pts {
            assert_eq!(p.car, car(&s.with_power(p.power_mw)).unwrap());
        }
        let mut quiet = s;
        quiet.link.rho_fwd_cps_mw_km = 0.0;
        quiet.link.rho_bwd_cps_mw_km = 0.0;
        let flat = scan_power(&quiet, 0.5, 3.0, 6).unwrap();
        assert!(flat.iter().all(|p| p.car == flat[0].car));
    }

    #[test]
    fn zero_length_row_is_fiberless() {
        let s = scenario();
        let pts = scan_length(&s, 0.0, 213.0, 10).unwrap();
        let mut bare = s.with_length(0.0);
        bare.link.rho_fwd_cps_mw_km = 0.0;
        bare.link.rho_bwd_cps_mw_km = 0.0;
        assert_eq!(pts[0].car, car(&bare).unwrap());
        assert!(pts.iter().all(|p| p.car.is_finite()));
    }

    #[test]
    fn grid_matches_power_scan() {
        let s = scenario();
        let powers = linspace(0.5, 3.0, 6);
        let g = grid(&s, &[20.0, 54.0], &powers).unwrap();
        let row = scan_power(&s.with_length(54.0), 0.5, 3.0, 6).unwrap();
        assert_eq!(&g[6..], &row[..]);
    }

    #[test]
    fn bad_ranges() {
        let s = scenario();
        assert!(matches!(scan_power(&s, 3.0, 0.5, 6), Err(CoexistenceError::InvalidRange(_))));
        assert!(matches!(scan_length(&s, 0.0, 10.0, 1), Err(CoexistenceError::InvalidRange(_))));
        assert!(matches!(scan_power(&s, -1.0, 1.0, 3), Err(CoexistenceError::InvalidRange(_))));
    }

    #[test]
    fn max_distance_edges() {
        let s = scenario();
        let tiny = max_distance(&s, 1e-30, 300.0).unwrap();
        assert!(tiny.not_reachable);
        assert_eq!(tiny.distance_km, 300.0);
        assert!(matches!(
            max_distance(&s, 1e12, 300.0),
            Err(CoexistenceError::ThresholdAboveBest { .. })
        ));
        let thr = threshold_for_distance(&s, 150.0).unwrap();
        let d = max_distance(&s, thr, 400.0).unwrap();
        assert!(!d.not_reachable);
        assert!((d.distance_km - 150.0).abs() <= DISTANCE_RESOLUTION_KM, "{d:?}");
    }

    #[test]
    fn swapping_sides_is_symmetric_without_fiber_or_light() {
        let mut s = scenario().with_length(0.0).with_power(0.0);
        s.link.insertion_loss_db = 0.0;
        s.source.arm_eff_remote = 0.3;
        s.det_remote.efficiency = 0.6;
        s.det_remote.dark_rate_cps = 800.0;
        s.sprs_ref_efficiency = 0.6;
        let mut swapped = s;
        std::mem::swap(&mut swapped.det_local, &mut swapped.det_remote);
        std::mem::swap(&mut swapped.source.arm_eff_local, &mut swapped.source.arm_eff_remote);
        let (a, b) = (car(&s).unwrap(), car(&swapped).unwrap());
        assert!(((a - b) / a).abs() < 1e-12);
    }

    #[test]
    fn dead_time_deficit_limits() {
        let mut s = scenario();
        assert!(dead_time_accidental_deficit(&s) > 0.0);
        assert!(correlated_car(&s).unwrap() > car(&s).unwrap());
        s.det_local.dead_time_ns = 0.0;
        s.det_remote.dead_time_ns = 0.0;
        assert_eq!(dead_time_accidental_deficit(&s), 0.0);
        assert_eq!(correlated_accidental_rate(&s), accidental_rate(&s));
        // sharp peak, dead time longer than half the window: each side
        // removes exactly half the window
        assert!((window_overlap_ps(2000.0, 0.0, -1e6, 0.0) - 1000.0).abs() < 1e-9);
        assert!((window_overlap_ps(2000.0, 0.0, 0.0, 1e6) - 1000.0).abs() < 1e-9);
        assert!((window_overlap_ps(2000.0, 1e-3, -500.0, 0.0) - 500.0).abs() < 1e-6);
        let full = window_overlap_ps(2000.0, 300.0, -1e7, 1e7);
        assert!((full - 2000.0).abs() < 1e-6, "{full}");
    }

    #[test]
    fn projection_toggles() {
        let s = scenario();
        let base = project_reach(&s, ProjectionToggle::AsConfigured, 1.0, 100.0, 1.0, 400.0).unwrap();
        assert!((base.reach.distance_km - 100.0).abs() <= DISTANCE_RESOLUTION_KM);
        let loud = project_reach(&s, ProjectionToggle::AsConfigured, 1.0, 100.0, 10.0, 400.0).unwrap();
        assert!(loud.reach.distance_km < 100.0);
        let fwd = ProjectionToggle::ForwardOnly.apply(&s);
        assert_eq!(fwd.carrier.power_bwd_mw, 0.0);
        assert_eq!(ProjectionToggle::Bidirectional.apply(&fwd).carrier.power_bwd_mw, 1.0);
        let mut eff = s;
        eff.det_remote.efficiency = 0.9;
        assert_eq!(ProjectionToggle::NoRescaling.apply(&eff).sprs_scale(), 1.0);
    }

    #[test]
    fn calibration_hits_target() {
        let s = scenario().with_length(122.0);
        let r = calibrate_pair_rate(&s, 0.68, 1.0, 2000.0).unwrap();
        let mut t = s;
        t.source.pair_rate_cps = r;
        assert!((predicted_tdev_ps(&t, 1.0, 2000.0) - 0.68).abs() < 1e-6);
    }

    #[test]
    fn zero_background_stderr_is_sigma_over_sqrt_n() {
        let mut s = scenario().with_power(0.0);
        s.det_local.dark_rate_cps = 0.0;
        s.det_remote.dark_rate_cps = 0.0;
        s.source.pair_rate_cps = 100.0;
        s.det_local.dead_time_ns = 0.0;
        s.det_remote.dead_time_ns = 0.0;
        s.window_ps = 1e9;
        let n = true_coincidence_rate(&s) * 10.0;
        let se = predicted_delay_stderr_ps(&s, 10.0);
        let expect = s.peak_sigma_ps() / n.sqrt();
        // the tiny multi-pair floor barely matters here
        assert!(((se - expect) / expect).abs() < 1e-3, "{se} vs {expect}");
    }
}
