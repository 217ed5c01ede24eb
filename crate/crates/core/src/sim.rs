//! Monte Carlo generator of detector timestamp streams.
//!
//! Every stochastic component draws from its own ChaCha8 stream, keyed by
//! `(seed, window index, component)`, so a run is bit-reproducible and any
//! time window of a long session can be generated on its own. Timestamps
//! are integer picoseconds.
//!
//! Per direction, pair emissions are thinned independently for the local
//! idler and remote signal arms, shifted by the link delay, mapped through
//! the site-B clock where applicable, smeared by jitter (plus dispersion on
//! the fiber arm), merged with SpRS and dark-count noise, de-duplicated at
//! picosecond resolution and finally passed through the detector dead time.
//!
//! Coinciding picoseconds are merged in [`SourceKind`] order and only the
//! first is kept, since one detector cannot fire twice within a picosecond.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use thiserror::Error;

use crate::coexistence::{remote_noise, CoexistenceScenario};
use crate::link::ModelError;

pub const PS_PER_S: f64 = 1e12;

/// Longest simulated span; keeps picosecond arithmetic well inside i64.
pub const MAX_DURATION_S: f64 = 1e6;

const SPEED_OF_LIGHT_KM_PER_S: f64 = 299_792.458;

/// Group index used for default link delays (air-guided core).
pub const HOLLOW_CORE_GROUP_INDEX: f64 = 1.0;

pub const CHANNEL_IDLER_A: u16 = 1;
pub const CHANNEL_SIGNAL_AT_B: u16 = 2;
pub const CHANNEL_IDLER_B: u16 = 3;
pub const CHANNEL_SIGNAL_AT_A: u16 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("timestamps are not sorted (index {index})")]
    UnsortedInput { index: usize },
    #[error("timestamp {tag} outside stream span [{start}, {end}]")]
    OutOfSpan { tag: i64, start: i64, end: i64 },
    #[error("invalid simulation run: {0}")]
    InvalidRun(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sorted detection timestamps of one detector channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    pub channel_id: u16,
    tags_ps: Vec<i64>,
    pub start_ps: i64,
    pub duration_ps: i64,
}

impl TimeTagStream {
    /// Builds a stream, checking strict ordering and that every tag lies in
    /// `[start_ps, start_ps + duration_ps]`.
    pub fn new(channel_id: u16, tags_ps: Vec<i64>, start_ps: i64, duration_ps: i64) -> Result<Self, SimError> {
        if let Some(index) = tags_ps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SimError::UnsortedInput { index: index + 1 });
        }
        let end = start_ps + duration_ps;
        if let Some(&tag) = tags_ps.iter().find(|&&t| t < start_ps || t > end) {
            return Err(SimError::OutOfSpan { tag, start: start_ps, end });
        }
        Ok(Self {
            channel_id,
            tags_ps,
            start_ps,
            duration_ps,
        })
    }

    /// Stream spanning `[0, last tag]`, as read back from a file.
    pub fn from_tags(channel_id: u16, tags_ps: Vec<i64>) -> Result<Self, SimError> {
        let start = tags_ps.first().copied().unwrap_or(0).min(0);
        let end = tags_ps.last().copied().unwrap_or(0).max(0);
        Self::new(channel_id, tags_ps, start, end - start)
    }

    pub fn tags(&self) -> &[i64] {
        &self.tags_ps
    }

    pub fn len(&self) -> usize {
        self.tags_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags_ps.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    pub fn rate_cps(&self) -> f64 {
        if self.duration_ps > 0 {
            self.len() as f64 / self.duration_s()
        } else {
            0.0
        }
    }

    /// Sub-stream with tags in `[from_ps, to_ps)`.
    pub fn window(&self, from_ps: i64, to_ps: i64) -> TimeTagStream {
        let lo = self.tags_ps.partition_point(|&t| t < from_ps);
        let hi = self.tags_ps.partition_point(|&t| t < to_ps);
        TimeTagStream {
            channel_id: self.channel_id,
            tags_ps: self.tags_ps[lo..hi].to_vec(),
            start_ps: from_ps,
            duration_ps: to_ps - from_ps,
        }
    }
}

/// Site-B clock relative to site A: `t_B = t + offset + drift * t + noise`,
/// where the white phase noise is drawn once per generated window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClockError {
    pub offset_ps: f64,
    pub drift_ps_per_s: f64,
    pub white_pm_sigma_ps: f64,
}

impl ClockError {
    /// Clock reading error at true time `t_ps` (excluding white noise).
    pub fn deterministic_offset_ps(&self, t_ps: f64) -> f64 {
        self.offset_ps + self.drift_ps_per_s * t_ps / PS_PER_S
    }
}

/// One simulated session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRun {
    pub scenario: CoexistenceScenario,
    pub duration_s: f64,
    pub seed: u64,
    pub clock_error: ClockError,
    pub link_delay_ab_ps: i64,
    pub link_delay_ba_ps: i64,
}

impl SimRun {
    /// Run with zero clock error and symmetric delays from the fiber length.
    pub fn new(scenario: CoexistenceScenario, duration_s: f64, seed: u64) -> Self {
        let d = default_link_delay_ps(scenario.link.length_km);
        Self {
            scenario,
            duration_s,
            seed,
            clock_error: ClockError::default(),
            link_delay_ab_ps: d,
            link_delay_ba_ps: d,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.scenario.validate()?;
        if !(self.duration_s > 0.0 && self.duration_s < MAX_DURATION_S) {
            return Err(SimError::InvalidRun(format!(
                "duration_s must be in (0, {MAX_DURATION_S}), got {}",
                self.duration_s
            )));
        }
        if self.link_delay_ab_ps < 0 || self.link_delay_ba_ps < 0 {
            return Err(SimError::InvalidRun("link delays must be >= 0".into()));
        }
        let c = &self.clock_error;
        if !(c.white_pm_sigma_ps >= 0.0 && c.offset_ps.is_finite() && c.drift_ps_per_s.is_finite()) {
            return Err(SimError::InvalidRun("clock error must be finite with sigma >= 0".into()));
        }
        Ok(())
    }

    pub fn duration_ps(&self) -> i64 {
        (self.duration_s * PS_PER_S).round() as i64
    }

    /// White phase noise of the site-B clock in window `window`.
    pub fn clock_noise_ps(&self, window: u64) -> f64 {
        let sigma = self.clock_error.white_pm_sigma_ps;
        if sigma == 0.0 {
            return 0.0;
        }
        let mut rng = component_rng(self.seed, window, Component::ClockNoise);
        sigma * rng.sample::<f64, _>(StandardNormal)
    }

    /// True site-B clock offset at `t_ps` inside window `window`.
    pub fn true_offset_ps(&self, window: u64, t_ps: f64) -> f64 {
        self.clock_error.deterministic_offset_ps(t_ps) + self.clock_noise_ps(window)
    }
}

pub fn default_link_delay_ps(length_km: f64) -> i64 {
    (length_km * HOLLOW_CORE_GROUP_INDEX / SPEED_OF_LIGHT_KM_PER_S * PS_PER_S).round() as i64
}

/// Origin of a detection, also the tie-break order for equal timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum SourceKind {
    Photon = 0,
    ForwardSprs = 1,
    BackwardSprs = 2,
    Dark = 3,
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Component {
    Pairs = 0,
    LocalArm = 1,
    RemoteArm = 2,
    ForwardNoise = 3,
    BackwardNoise = 4,
    LocalDark = 5,
    RemoteDark = 6,
    ClockNoise = 15,
}

/// Quantum channel direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    fn stream_base(self) -> u64 {
        match self {
            Direction::AToB => 0,
            Direction::BToA => 8,
        }
    }
}

fn component_rng(seed: u64, window: u64, component: Component) -> ChaCha8Rng {
    stream_rng(seed, window, component as u64)
}

fn stream_rng(seed: u64, window: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(window.wrapping_mul(16).wrapping_add(slot));
    rng
}

fn direction_rng(seed: u64, window: u64, dir: Direction, component: Component) -> ChaCha8Rng {
    stream_rng(seed, window, dir.stream_base() + component as u64)
}

/// Homogeneous Poisson arrivals at `rate_cps` over `[start_ps, end_ps)`,
/// floored to integer picoseconds (ties possible).
pub fn inject_poisson_noise<R: Rng + ?Sized>(rate_cps: f64, start_ps: i64, end_ps: i64, rng: &mut R) -> Vec<i64> {
    if !(rate_cps > 0.0) || end_ps <= start_ps {
        return Vec::new();
    }
    let mean_gap_ps = PS_PER_S / rate_cps;
    let span = (end_ps - start_ps) as f64;
    let mut out = Vec::with_capacity((span / mean_gap_ps * 1.01 + 16.0) as usize);
    let mut t = 0.0;
    loop {
        let gap: f64 = rng.sample(Exp1);
        t += gap * mean_gap_ps;
        if t >= span {
            break;
        }
        out.push(start_ps + t as i64);
    }
    out
}

/// Pair emission times; both photons of a pair leave the source together.
pub fn generate_pairs<R: Rng + ?Sized>(pair_rate_cps: f64, start_ps: i64, end_ps: i64, rng: &mut R) -> Vec<i64> {
    inject_poisson_noise(pair_rate_cps, start_ps, end_ps, rng)
}

/// Arm of the pair source between emission and time tagging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionPath {
    /// Product of collection, channel and detector efficiencies.
    pub efficiency: f64,
    pub jitter_sigma_ps: f64,
    pub extra_broadening_sigma_ps: f64,
    pub delay_ps: i64,
}

impl DetectionPath {
    pub fn sigma_total_ps(&self) -> f64 {
        self.jitter_sigma_ps.hypot(self.extra_broadening_sigma_ps)
    }
}

/// Bernoulli thinning, delay and Gaussian smearing of emissions; output sorted.
pub fn transmit_and_detect<R: Rng + ?Sized>(emissions: &[i64], path: &DetectionPath, rng: &mut R) -> Vec<i64> {
    detect(emissions, path, None, rng)
}

/// Site-B clock mapping applied to a true arrival time.
#[derive(Debug, Clone, Copy)]
struct SiteClock {
    error: ClockError,
    noise_ps: f64,
}

impl SiteClock {
    fn map(&self, t: i64) -> i64 {
        t + (self.error.deterministic_offset_ps(t as f64) + self.noise_ps).round() as i64
    }

    fn max_abs_correction(&self, start: i64, end: i64) -> i64 {
        let a = self.error.deterministic_offset_ps(start as f64) + self.noise_ps;
        let b = self.error.deterministic_offset_ps(end as f64) + self.noise_ps;
        a.abs().max(b.abs()).ceil() as i64
    }
}

fn detect<R: Rng + ?Sized>(emissions: &[i64], path: &DetectionPath, clock: Option<&SiteClock>, rng: &mut R) -> Vec<i64> {
    let sigma = path.sigma_total_ps();
    let eff = path.efficiency.clamp(0.0, 1.0);
    let mut out = Vec::with_capacity((emissions.len() as f64 * eff * 1.05) as usize + 16);
    for &e in emissions {
        if eff < 1.0 && rng.random::<f64>() >= eff {
            continue;
        }
        let mut t = e + path.delay_ps;
        if let Some(c) = clock {
            t = c.map(t);
        }
        if sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            t += (sigma * z).round() as i64;
        }
        out.push(t);
    }
    out.sort_unstable();
    out
}

/// Non-paralyzable dead time: a tag survives iff it comes at least the dead
/// time after the previous surviving tag.
pub fn apply_dead_time(tags: &[i64], dead_time_ns: f64) -> Result<Vec<i64>, SimError> {
    if let Some(index) = tags.windows(2).position(|w| w[1] < w[0]) {
        return Err(SimError::UnsortedInput { index: index + 1 });
    }
    let tau = (dead_time_ns * 1e3).round() as i64;
    if tau <= 0 {
        return Ok(tags.to_vec());
    }
    let mut out = Vec::with_capacity(tags.len());
    let mut last: Option<i64> = None;
    for &t in tags {
        if last.is_none_or(|l| t - l >= tau) {
            out.push(t);
            last = Some(t);
        }
    }
    Ok(out)
}

fn merge_sources(mut parts: Vec<(SourceKind, Vec<i64>)>) -> Vec<i64> {
    let total = parts.iter().map(|(_, v)| v.len()).sum();
    let mut all: Vec<(i64, SourceKind)> = Vec::with_capacity(total);
    for (kind, tags) in parts.drain(..) {
        all.extend(tags.into_iter().map(|t| (t, kind)));
    }
    all.sort_unstable();
    let mut out: Vec<i64> = Vec::with_capacity(all.len());
    for (t, _) in all {
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    out
}

/// Local idler and remote signal streams of one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionStreams {
    pub local: TimeTagStream,
    pub remote: TimeTagStream,
}

/// The four detector streams of a bidirectional run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioStreams {
    /// Idler photons detected at site A (SPD1).
    pub idler_a: TimeTagStream,
    /// Signal photons from A detected at site B (SPD2).
    pub signal_at_b: TimeTagStream,
    /// Idler photons detected at site B (SPD3).
    pub idler_b: TimeTagStream,
    /// Signal photons from B detected at site A (SPD4).
    pub signal_at_a: TimeTagStream,
}

impl ScenarioStreams {
    pub fn all(&self) -> [&TimeTagStream; 4] {
        [&self.idler_a, &self.signal_at_b, &self.idler_b, &self.signal_at_a]
    }
}

/// Generates one direction over `[start_ps, end_ps)` for window `window`.
pub fn simulate_direction(
    run: &SimRun,
    dir: Direction,
    window: u64,
    start_ps: i64,
    end_ps: i64,
) -> Result<DirectionStreams, SimError> {
    run.validate()?;
    if end_ps <= start_ps {
        return Err(SimError::InvalidRun(format!("empty window [{start_ps}, {end_ps})")));
    }
    let s = match dir {
        Direction::AToB => run.scenario,
        Direction::BToA => run.scenario.reversed(),
    };
    let delay = match dir {
        Direction::AToB => run.link_delay_ab_ps,
        Direction::BToA => run.link_delay_ba_ps,
    };
    let clock_b = SiteClock {
        error: run.clock_error,
        noise_ps: run.clock_noise_ps(window),
    };
    // which end of the link sits on the B clock
    let (local_clock, remote_clock) = match dir {
        Direction::AToB => (None, Some(&clock_b)),
        Direction::BToA => (Some(&clock_b), None),
    };

    let local_path = DetectionPath {
        efficiency: s.source.arm_eff_local * s.det_local.efficiency,
        jitter_sigma_ps: s.det_local.jitter_sigma_ps,
        extra_broadening_sigma_ps: 0.0,
        delay_ps: 0,
    };
    let remote_path = DetectionPath {
        efficiency: s.source.arm_eff_remote * s.transmittance() * s.det_remote.efficiency,
        jitter_sigma_ps: s.det_remote.jitter_sigma_ps,
        extra_broadening_sigma_ps: s.dispersion_sigma_ps(),
        delay_ps: delay,
    };

    let max_sigma = local_path.sigma_total_ps().max(remote_path.sigma_total_ps());
    let max_dead = (s.det_local.dead_time_ns.max(s.det_remote.dead_time_ns) * 1e3).ceil() as i64;
    let pad = 2 * max_dead + (10.0 * max_sigma).ceil() as i64 + clock_b.max_abs_correction(start_ps, end_ps) + 1_000;
    let (gen_start, gen_end) = (start_ps - pad, end_ps + pad);

    let seed = run.seed;
    // Only pairs detected in at least one arm matter. Drawing those at the
    // thinned rate and then the detection pattern is equivalent to
    // thinning each arm independently.
    let (el, er) = (local_path.efficiency.clamp(0.0, 1.0), remote_path.efficiency.clamp(0.0, 1.0));
    let p_any = 1.0 - (1.0 - el) * (1.0 - er);
    let mut pair_rng = direction_rng(seed, window, dir, Component::Pairs);
    let emissions = generate_pairs(s.source.pair_rate_cps * p_any, gen_start - delay, gen_end, &mut pair_rng);
    let (p_both, p_local) = (el * er / p_any, el / p_any);
    let mut local_em = Vec::with_capacity((emissions.len() as f64 * p_local * 1.05) as usize + 16);
    let mut remote_em = Vec::new();
    for &e in &emissions {
        let u: f64 = pair_rng.random();
        if u < p_local {
            local_em.push(e);
            if u < p_both {
                remote_em.push(e);
            }
        } else {
            remote_em.push(e);
        }
    }
    drop(emissions);
    let certain = |p: &DetectionPath| DetectionPath { efficiency: 1.0, ..*p };
    let local_photons = detect(
        &local_em,
        &certain(&local_path),
        local_clock,
        &mut direction_rng(seed, window, dir, Component::LocalArm),
    );
    let remote_photons = detect(
        &remote_em,
        &certain(&remote_path),
        remote_clock,
        &mut direction_rng(seed, window, dir, Component::RemoteArm),
    );

    // Noise is uniform in time, so drawing it directly on the detector's
    // clock is equivalent to mapping it.
    let noise = remote_noise(&s);
    let local_dark = inject_poisson_noise(
        s.det_local.dark_rate_cps,
        gen_start,
        gen_end,
        &mut direction_rng(seed, window, dir, Component::LocalDark),
    );
    let fwd = inject_poisson_noise(
        noise.forward_sprs_cps,
        gen_start,
        gen_end,
        &mut direction_rng(seed, window, dir, Component::ForwardNoise),
    );
    let bwd = inject_poisson_noise(
        noise.backward_sprs_cps,
        gen_start,
        gen_end,
        &mut direction_rng(seed, window, dir, Component::BackwardNoise),
    );
    let remote_dark = inject_poisson_noise(
        noise.dark_cps,
        gen_start,
        gen_end,
        &mut direction_rng(seed, window, dir, Component::RemoteDark),
    );

    let local = merge_sources(vec![(SourceKind::Photon, local_photons), (SourceKind::Dark, local_dark)]);
    let remote = merge_sources(vec![
        (SourceKind::Photon, remote_photons),
        (SourceKind::ForwardSprs, fwd),
        (SourceKind::BackwardSprs, bwd),
        (SourceKind::Dark, remote_dark),
    ]);
    let local = apply_dead_time(&local, s.det_local.dead_time_ns)?;
    let remote = apply_dead_time(&remote, s.det_remote.dead_time_ns)?;

    let (local_ch, remote_ch) = match dir {
        Direction::AToB => (CHANNEL_IDLER_A, CHANNEL_SIGNAL_AT_B),
        Direction::BToA => (CHANNEL_IDLER_B, CHANNEL_SIGNAL_AT_A),
    };
    let clip = |ch: u16, tags: Vec<i64>| {
        let lo = tags.partition_point(|&t| t < start_ps);
        let hi = tags.partition_point(|&t| t < end_ps);
        TimeTagStream::new(ch, tags[lo..hi].to_vec(), start_ps, end_ps - start_ps)
    };
    Ok(DirectionStreams {
        local: clip(local_ch, local)?,
        remote: clip(remote_ch, remote)?,
    })
}

/// All four streams over `[start_ps, end_ps)` for window `window`.
pub fn simulate_window(run: &SimRun, window: u64, start_ps: i64, end_ps: i64) -> Result<ScenarioStreams, SimError> {
    let ab = simulate_direction(run, Direction::AToB, window, start_ps, end_ps)?;
    let ba = simulate_direction(run, Direction::BToA, window, start_ps, end_ps)?;
    Ok(ScenarioStreams {
        idler_a: ab.local,
        signal_at_b: ab.remote,
        idler_b: ba.local,
        signal_at_a: ba.remote,
    })
}

/// The whole run as a single window starting at t = 0.
pub fn run_scenario(run: &SimRun) -> Result<ScenarioStreams, SimError> {
    run.validate()?;
    simulate_window(run, 0, 0, run.duration_ps())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dead_time_hand_example() {
        let ns = 1000;
        let tags = [0, 500 * ns, 1200 * ns];
        assert_eq!(apply_dead_time(&tags, 1000.0).unwrap(), vec![0, 1200 * ns]);
        assert_eq!(apply_dead_time(&tags, 0.0).unwrap(), tags.to_vec());
        assert_eq!(
            apply_dead_time(&[5, 3], 1.0),
            Err(SimError::UnsortedInput { index: 1 })
        );
    }

    #[test]
    fn zero_rate_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(inject_poisson_noise(0.0, 0, 1_000_000, &mut rng).is_empty());
        assert!(generate_pairs(0.0, 0, 1_000_000, &mut rng).is_empty());
    }

    #[test]
    fn ideal_path_is_a_pure_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = vec![10, 20, 35, 1000];
        let path = DetectionPath {
            efficiency: 1.0,
            jitter_sigma_ps: 0.0,
            extra_broadening_sigma_ps: 0.0,
            delay_ps: 7,
        };
        assert_eq!(transmit_and_detect(&e, &path, &mut rng), vec![17, 27, 42, 1007]);
    }

    #[test]
    fn stream_rejects_bad_input() {
        assert!(TimeTagStream::new(1, vec![1, 1], 0, 10).is_err());
        assert!(TimeTagStream::new(1, vec![1, 20], 0, 10).is_err());
        let s = TimeTagStream::new(1, vec![0, 3, 10], 0, 10).unwrap();
        assert_eq!(s.window(3, 10).tags(), &[3]);
    }

    #[test]
    fn merge_keeps_one_tag_per_picosecond() {
        let out = merge_sources(vec![
            (SourceKind::Dark, vec![5, 9]),
            (SourceKind::Photon, vec![5, 7]),
        ]);
        assert_eq!(out, vec![5, 7, 9]);
    }

    #[test]
    fn components_use_distinct_streams() {
        let a: u64 = component_rng(9, 0, Component::Pairs).random();
        let b: u64 = component_rng(9, 0, Component::LocalArm).random();
        let c: u64 = component_rng(9, 1, Component::Pairs).random();
        assert!(a != b && a != c);
        assert_eq!(a, component_rng(9, 0, Component::Pairs).random::<u64>());
    }
}
