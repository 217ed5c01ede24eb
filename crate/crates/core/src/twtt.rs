//! Two-way time transfer: combines the A->B and B->A delay measurements
//! into a clock offset and a link delay, interval by interval.
//!
//! Sign convention: a positive offset means the site-B clock is ahead of
//! site A.

use rayon::prelude::*;
use thiserror::Error;

use crate::coexistence::true_coincidence_rate;
use crate::coincidence::{extract_delay, CoincidenceError, DelayEstimate, ExtractConfig};
use crate::sim::{simulate_window, ClockError, ScenarioStreams, SimError, SimRun, TimeTagStream, PS_PER_S};
use crate::stability::{linear_fit, PhaseSeries, StabilityError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TwttError {
    #[error("interval {interval}: too few coincidences (expected {expected:.1})")]
    InsufficientCoincidences { interval: usize, expected: f64 },
    #[error("interval {interval}: {source}")]
    Interval {
        interval: usize,
        #[source]
        source: CoincidenceError,
    },
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Fewer expected peak coincidences than this per interval is refused.
pub const MIN_EXPECTED_COINCIDENCES: f64 = 100.0;

/// `(offset, delay)` from `delta_ab = d + x` and `delta_ba = d - x`.
pub fn two_way_combine(delta_ab_ps: f64, delta_ba_ps: f64) -> (f64, f64) {
    (0.5 * (delta_ab_ps - delta_ba_ps), 0.5 * (delta_ab_ps + delta_ba_ps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetSample {
    pub epoch_s: f64,
    pub offset_ps: f64,
    pub stderr_ps: f64,
    pub delay_ps: f64,
    /// Injected offset at the epoch, when known.
    pub truth_ps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetSeries {
    pub interval_s: f64,
    pub samples: Vec<OffsetSample>,
    pub ground_truth: Option<ClockError>,
}

impl OffsetSeries {
    pub fn offsets_ps(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.offset_ps).collect()
    }

    pub fn mean_offset_ps(&self) -> f64 {
        self.samples.iter().map(|s| s.offset_ps).sum::<f64>() / self.samples.len() as f64
    }

    /// Standard error of the mean from the sample scatter.
    pub fn stderr_of_mean_ps(&self) -> f64 {
        let n = self.samples.len() as f64;
        let m = self.mean_offset_ps();
        let var = self.samples.iter().map(|s| (s.offset_ps - m).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }

    /// Root mean square of the per-sample reported stderr.
    pub fn rms_stderr_ps(&self) -> f64 {
        let n = self.samples.len() as f64;
        (self.samples.iter().map(|s| s.stderr_ps * s.stderr_ps).sum::<f64>() / n).sqrt()
    }

    /// Linear fit `offset = x0 + drift * epoch`; returns
    /// `(drift_ps_per_s, stderr, x0_ps)`.
    pub fn fit_drift(&self) -> Result<(f64, f64, f64), StabilityError> {
        let t: Vec<f64> = self.samples.iter().map(|s| s.epoch_s).collect();
        let (b, a, se) = linear_fit(&t, &self.offsets_ps())?;
        Ok((b, se, a))
    }

    /// Offset residuals against the injected truth, where known.
    pub fn residuals_ps(&self) -> Vec<f64> {
        self.samples
            .iter()
            .filter_map(|s| s.truth_ps.map(|t| s.offset_ps - t))
            .collect()
    }

    pub fn to_phase_series(&self) -> Result<PhaseSeries, StabilityError> {
        PhaseSeries::from_ps(self.interval_s, &self.offsets_ps())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    pub interval_s: f64,
    /// Search used on the first interval.
    pub acquisition: ExtractConfig,
    /// Coarse half range around the previous estimate on later intervals.
    pub tracking_half_range_ps: i64,
    /// Intervals processed concurrently between tracking updates.
    pub chunk: usize,
}

impl SessionConfig {
    pub fn new(interval_s: f64) -> Self {
        Self {
            interval_s,
            acquisition: ExtractConfig::default(),
            tracking_half_range_ps: 50_000,
            chunk: 8,
        }
    }
}

fn interval_bounds(interval_s: f64, k: usize) -> (i64, i64) {
    let lo = (k as f64 * interval_s * PS_PER_S).round() as i64;
    let hi = ((k + 1) as f64 * interval_s * PS_PER_S).round() as i64;
    (lo, hi)
}

struct Measured {
    offset_ps: f64,
    delay_ps: f64,
    stderr_ps: f64,
    ab: f64,
    ba: f64,
}

fn measure(streams: &ScenarioStreams, k: usize, centers: (i64, i64), cfg: &SessionConfig, acquire: bool) -> Result<Measured, TwttError> {
    let config = |c: i64| {
        if acquire {
            cfg.acquisition
        } else {
            ExtractConfig {
                center_ps: c,
                coarse_half_range_ps: cfg.tracking_half_range_ps,
                ..cfg.acquisition
            }
        }
    };
    let wrap = |r: Result<DelayEstimate, CoincidenceError>| {
        r.map_err(|e| match e {
            CoincidenceError::NoPeak { .. } => TwttError::InsufficientCoincidences {
                interval: k,
                expected: 0.0,
            },
            other => TwttError::Interval { interval: k, source: other },
        })
    };
    let ab = wrap(extract_delay(&streams.idler_a, &streams.signal_at_b, &config(centers.0)))?;
    let ba = wrap(extract_delay(&streams.idler_b, &streams.signal_at_a, &config(centers.1)))?;
    let (offset_ps, delay_ps) = two_way_combine(ab.delay_ps, ba.delay_ps);
    Ok(Measured {
        offset_ps,
        delay_ps,
        stderr_ps: 0.5 * (ab.stderr_ps.powi(2) + ba.stderr_ps.powi(2)).sqrt(),
        ab: ab.delay_ps,
        ba: ba.delay_ps,
    })
}

/// Runs intervals `0..n` in chunks: interval 0 acquires over the wide
/// range, later ones track around the last estimate of the previous chunk.
fn run_intervals<F>(n: usize, cfg: &SessionConfig, streams_for: F) -> Result<Vec<(usize, Measured)>, TwttError>
where
    F: Fn(usize) -> Result<ScenarioStreams, TwttError> + Sync,
{
    let first = measure(&streams_for(0)?, 0, (0, 0), cfg, true)?;
    let mut centers = (first.ab.round() as i64, first.ba.round() as i64);
    let mut out = vec![(0, first)];
    let mut k = 1;
    let chunk = cfg.chunk.max(1);
    while k < n {
        let end = (k + chunk).min(n);
        let results: Vec<Result<(usize, Measured), TwttError>> = (k..end)
            .into_par_iter()
            .map(|i| measure(&streams_for(i)?, i, centers, cfg, false).map(|m| (i, m)))
            .collect();
        for r in results {
            out.push(r?);
        }
        let last = &out.last().expect("non-empty").1;
        centers = (last.ab.round() as i64, last.ba.round() as i64);
        k = end;
    }
    Ok(out)
}

fn validate_interval(interval_s: f64, duration_s: f64) -> Result<usize, TwttError> {
    if !(interval_s > 0.0 && interval_s.is_finite()) {
        return Err(TwttError::InvalidSession(format!("interval must be > 0, got {interval_s}")));
    }
    let n = (duration_s / interval_s + 1e-9).floor() as usize;
    if n == 0 {
        return Err(TwttError::InvalidSession(format!(
            "duration {duration_s} s is shorter than one interval of {interval_s} s"
        )));
    }
    Ok(n)
}

/// Simulates the run interval by interval and measures one offset sample
/// per interval, with epoch at the interval midpoint.
pub fn run_session(run: &SimRun, interval_s: f64) -> Result<OffsetSeries, TwttError> {
    run_session_with(run, &SessionConfig::new(interval_s))
}

pub fn run_session_with(run: &SimRun, cfg: &SessionConfig) -> Result<OffsetSeries, TwttError> {
    run.validate()?;
    let n = validate_interval(cfg.interval_s, run.duration_s)?;
    let expected = true_coincidence_rate(&run.scenario).min(true_coincidence_rate(&run.scenario.reversed())) * cfg.interval_s;
    if !(expected >= MIN_EXPECTED_COINCIDENCES) {
        return Err(TwttError::InsufficientCoincidences { interval: 0, expected });
    }
    let measured = run_intervals(n, cfg, |k| {
        let (lo, hi) = interval_bounds(cfg.interval_s, k);
        Ok(simulate_window(run, k as u64, lo, hi)?)
    })?;
    let samples = measured
        .into_iter()
        .map(|(k, m)| {
            let (lo, hi) = interval_bounds(cfg.interval_s, k);
            let mid = 0.5 * (lo + hi) as f64;
            OffsetSample {
                epoch_s: mid / PS_PER_S,
                offset_ps: m.offset_ps,
                stderr_ps: m.stderr_ps,
                delay_ps: m.delay_ps,
                truth_ps: Some(run.true_offset_ps(k as u64, mid)),
            }
        })
        .collect();
    Ok(OffsetSeries {
        interval_s: cfg.interval_s,
        samples,
        ground_truth: Some(run.clock_error),
    })
}

/// Offset series from already recorded streams, cut into intervals from
/// the start of the idler-A stream.
pub fn series_from_streams(streams: &ScenarioStreams, cfg: &SessionConfig) -> Result<OffsetSeries, TwttError> {
    let start = streams.idler_a.start_ps;
    let duration_s = streams.idler_a.duration_ps as f64 / PS_PER_S;
    let n = validate_interval(cfg.interval_s, duration_s)?;
    let cut = |s: &TimeTagStream, k: usize| {
        let (lo, hi) = interval_bounds(cfg.interval_s, k);
        s.window(start + lo, start + hi)
    };
    let measured = run_intervals(n, cfg, |k| {
        Ok(ScenarioStreams {
            idler_a: cut(&streams.idler_a, k),
            signal_at_b: cut(&streams.signal_at_b, k),
            idler_b: cut(&streams.idler_b, k),
            signal_at_a: cut(&streams.signal_at_a, k),
        })
    })?;
    let samples = measured
        .into_iter()
        .map(|(k, m)| {
            let (lo, hi) = interval_bounds(cfg.interval_s, k);
            OffsetSample {
                epoch_s: (start as f64 + 0.5 * (lo + hi) as f64) / PS_PER_S,
                offset_ps: m.offset_ps,
                stderr_ps: m.stderr_ps,
                delay_ps: m.delay_ps,
                truth_ps: None,
            }
        })
        .collect();
    Ok(OffsetSeries {
        interval_s: cfg.interval_s,
        samples,
        ground_truth: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_examples() {
        assert_eq!(two_way_combine(7.0, 7.0), (0.0, 7.0));
        assert_eq!(two_way_combine(10.0, -10.0), (10.0, 0.0));
        let (x, d) = two_way_combine(1234.5 + 1e6, 1000.25 + 1e6);
        assert_eq!(x, two_way_combine(1234.5, 1000.25).0);
        assert_eq!(d, two_way_combine(1234.5, 1000.25).1 + 1e6);
    }

    #[test]
    fn bad_interval() {
        assert!(matches!(validate_interval(0.0, 10.0), Err(TwttError::InvalidSession(_))));
        assert!(matches!(validate_interval(20.0, 10.0), Err(TwttError::InvalidSession(_))));
        assert_eq!(validate_interval(0.1, 1.0).unwrap(), 10);
    }
}
