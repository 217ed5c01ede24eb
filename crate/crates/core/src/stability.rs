//! Overlapping time deviation, Allan deviation and modified Allan deviation
//! of a phase (time-error) series, plus white-noise synthesizers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("series too short for averaging factor m = {0}")]
    SeriesTooShort(usize),
    #[error("need at least {needed} points in the fit range, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("invalid phase series: {0}")]
    InvalidSeries(String),
}

/// Time-error samples `x_i` (seconds) taken every `tau0_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    pub tau0_s: f64,
    pub x_s: Vec<f64>,
}

impl PhaseSeries {
    pub fn new(tau0_s: f64, x_s: Vec<f64>) -> Result<Self, StabilityError> {
        if !(tau0_s > 0.0 && tau0_s.is_finite()) {
            return Err(StabilityError::InvalidSeries(format!("tau0 must be > 0, got {tau0_s}")));
        }
        if x_s.len() < 4 {
            return Err(StabilityError::InvalidSeries(format!("need >= 4 samples, got {}", x_s.len())));
        }
        if let Some(i) = x_s.iter().position(|x| !x.is_finite()) {
            return Err(StabilityError::InvalidSeries(format!("sample {i} is not finite")));
        }
        Ok(Self { tau0_s, x_s })
    }

    pub fn from_ps(tau0_s: f64, x_ps: &[f64]) -> Result<Self, StabilityError> {
        Self::new(tau0_s, x_ps.iter().map(|x| x * 1e-12).collect())
    }

    pub fn len(&self) -> usize {
        self.x_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_s.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityPoint {
    pub tau_s: f64,
    pub deviation: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Number of terms averaged.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StabilityCurve {
    pub points: Vec<StabilityPoint>,
}

impl StabilityCurve {
    pub fn at(&self, tau_s: f64) -> Option<&StabilityPoint> {
        self.points
            .iter()
            .find(|p| (p.tau_s - tau_s).abs() <= 1e-9 * tau_s.abs())
    }
}

/// Noise type used for the confidence-interval degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    WhitePm,
    WhiteFm,
}

/// Octave factors 1, 2, 4, ... with at least `span * m + 1` samples.
pub fn octave_factors(n: usize, span: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut m = 1usize;
    while n > span * m {
        out.push(m);
        m *= 2;
    }
    out
}

fn second_differences(x: &[f64], m: usize) -> Vec<f64> {
    (0..x.len() - 2 * m)
        .map(|i| x[i + 2 * m] - 2.0 * x[i + m] + x[i])
        .collect()
}

/// Sums of `m` consecutive second differences. A running sum, restarted
/// from scratch every `m` terms to keep rounding error bounded.
fn block_sums(d: &[f64], m: usize) -> Vec<f64> {
    let count = d.len() + 1 - m;
    let mut out = Vec::with_capacity(count);
    let mut s = 0.0;
    for j in 0..count {
        if j % m == 0 {
            s = d[j..j + m].iter().sum();
        } else {
            s += d[j + m - 1] - d[j - 1];
        }
        out.push(s);
    }
    out
}

fn chi2_interval(dev: f64, edf: f64) -> (f64, f64) {
    if !(edf > 0.0) || dev == 0.0 {
        return (dev, dev);
    }
    match ChiSquared::new(edf) {
        Ok(chi) => {
            let lo = dev * (edf / chi.inverse_cdf(0.8413)).sqrt();
            let hi = dev * (edf / chi.inverse_cdf(0.1587)).sqrt();
            (lo, hi)
        }
        Err(_) => (dev, dev),
    }
}

/// Degrees of freedom of the overlapping Allan variance for white noise.
pub fn adev_edf(n: usize, m: usize, kind: NoiseKind) -> f64 {
    let (n, m) = (n as f64, m as f64);
    match kind {
        NoiseKind::WhitePm => (n + 1.0) * (n - 2.0 * m) / (2.0 * (n - m)),
        NoiseKind::WhiteFm => (3.0 * (n - 1.0) / (2.0 * m) - 2.0 * (n - 2.0) / n) * 4.0 * m * m / (4.0 * m * m + 5.0),
    }
}

/// Rough degrees of freedom for TDEV/MDEV: the number of non-overlapping
/// `3m` spans. Conservative for white noise; approximate otherwise.
pub fn tdev_edf(n: usize, m: usize) -> f64 {
    ((n / (3 * m)) as f64).max(1.0)
}

fn check_factors(series: &PhaseSeries, factors: &[usize], span: usize) -> Result<(), StabilityError> {
    for w in factors.windows(2) {
        if w[1] <= w[0] {
            return Err(StabilityError::InvalidSeries("averaging factors must be strictly increasing".into()));
        }
    }
    match factors.iter().find(|&&m| m == 0 || series.len() < span * m + 1) {
        Some(&m) => Err(StabilityError::SeriesTooShort(m)),
        None => Ok(()),
    }
}

/// Overlapping TDEV at `tau = m * tau0` for each factor `m`.
pub fn tdev(series: &PhaseSeries, factors: &[usize]) -> Result<StabilityCurve, StabilityError> {
    check_factors(series, factors, 3)?;
    let n = series.len();
    let points = factors
        .par_iter()
        .map(|&m| {
            let d = second_differences(&series.x_s, m);
            let s = block_sums(&d, m);
            let count = s.len();
            let sum: f64 = s.iter().map(|v| v * v).sum();
            let mf = m as f64;
            let dev = (sum / (6.0 * mf * mf * count as f64)).sqrt();
            let (ci_lo, ci_hi) = chi2_interval(dev, tdev_edf(n, m));
            StabilityPoint {
                tau_s: mf * series.tau0_s,
                deviation: dev,
                ci_lo,
                ci_hi,
                n: count,
            }
        })
        .collect();
    Ok(StabilityCurve { points })
}

/// Modified Allan deviation; `tdev = tau / sqrt(3) * mdev`.
pub fn mdev(series: &PhaseSeries, factors: &[usize]) -> Result<StabilityCurve, StabilityError> {
    let t = tdev(series, factors)?;
    let points = t
        .points
        .into_iter()
        .map(|p| {
            let k = 3f64.sqrt() / p.tau_s;
            StabilityPoint {
                deviation: p.deviation * k,
                ci_lo: p.ci_lo * k,
                ci_hi: p.ci_hi * k,
                ..p
            }
        })
        .collect();
    Ok(StabilityCurve { points })
}

/// Overlapping Allan deviation, with white-PM confidence intervals.
pub fn adev(series: &PhaseSeries, factors: &[usize]) -> Result<StabilityCurve, StabilityError> {
    adev_with(series, factors, NoiseKind::WhitePm)
}

pub fn adev_with(series: &PhaseSeries, factors: &[usize], kind: NoiseKind) -> Result<StabilityCurve, StabilityError> {
    check_factors(series, factors, 2)?;
    let n = series.len();
    let points = factors
        .par_iter()
        .map(|&m| {
            let d = second_differences(&series.x_s, m);
            let count = d.len();
            let sum: f64 = d.iter().map(|v| v * v).sum();
            let tau = m as f64 * series.tau0_s;
            let dev = (sum / (2.0 * tau * tau * count as f64)).sqrt();
            let (ci_lo, ci_hi) = chi2_interval(dev, adev_edf(n, m, kind));
            StabilityPoint {
                tau_s: tau,
                deviation: dev,
                ci_lo,
                ci_hi,
                n: count,
            }
        })
        .collect();
    Ok(StabilityCurve { points })
}

/// i.i.d. Gaussian phase (white PM, `level` = sigma_x in s) or a random
/// walk of phase with Gaussian frequency steps (white FM, `level` = sigma_y).
pub fn synthesize_noise(kind: NoiseKind, level: f64, tau0_s: f64, n: usize, seed: u64) -> Result<PhaseSeries, StabilityError> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(StabilityError::InvalidSeries(format!("noise level must be >= 0, got {level}")));
    }
    if level == 0.0 {
        return PhaseSeries::new(tau0_s, vec![0.0; n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, level).expect("finite sigma");
    let x = match kind {
        NoiseKind::WhitePm => (0..n).map(|_| normal.sample(&mut rng)).collect(),
        NoiseKind::WhiteFm => {
            let mut acc = 0.0;
            (0..n)
                .map(|i| {
                    if i > 0 {
                        acc += normal.sample(&mut rng) * tau0_s;
                    }
                    acc
                })
                .collect()
        }
    };
    PhaseSeries::new(tau0_s, x)
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, stderr_b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64), StabilityError> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(StabilityError::TooFewPoints { needed: 3, got: n.min(y.len()) });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(StabilityError::TooFewPoints { needed: 3, got: 1 });
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ssr: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok((b, a, stderr))
}

/// Log-log slope of the curve over `tau_range` (inclusive), with stderr.
/// Points with zero deviation are skipped.
pub fn fit_slope(curve: &StabilityCurve, tau_range: Option<(f64, f64)>) -> Result<(f64, f64), StabilityError> {
    let (lo, hi) = tau_range.unwrap_or((0.0, f64::INFINITY));
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .points
        .iter()
        .filter(|p| p.tau_s >= lo && p.tau_s <= hi && p.deviation > 0.0)
        .map(|p| (p.tau_s.ln(), p.deviation.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(StabilityError::TooFewPoints { needed: 3, got: xs.len() });
    }
    let (b, _, se) = linear_fit(&xs, &ys)?;
    Ok((b, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(taus: &[f64], f: impl Fn(f64) -> f64) -> StabilityCurve {
        StabilityCurve {
            points: taus
                .iter()
                .map(|&t| StabilityPoint {
                    tau_s: t,
                    deviation: f(t),
                    ci_lo: 0.0,
                    ci_hi: 0.0,
                    n: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn constant_and_ramp_give_zero() {
        let c = PhaseSeries::new(1.0, vec![3.5; 100]).unwrap();
        let f = octave_factors(100, 3);
        assert!(tdev(&c, &f).unwrap().points.iter().all(|p| p.deviation == 0.0));
        assert!(adev(&c, &f).unwrap().points.iter().all(|p| p.deviation == 0.0));
        let r = PhaseSeries::new(1.0, (0..100).map(|i| i as f64 * 0.25).collect()).unwrap();
        assert!(tdev(&r, &f).unwrap().points.iter().all(|p| p.deviation == 0.0));
        assert!(adev(&r, &f).unwrap().points.iter().all(|p| p.deviation == 0.0));
    }

    #[test]
    fn too_short() {
        let s = PhaseSeries::new(1.0, vec![0.0; 9]).unwrap();
        assert!(tdev(&s, &[2]).is_ok());
        assert_eq!(tdev(&s, &[3]), Err(StabilityError::SeriesTooShort(3)));
        assert_eq!(adev(&s, &[5]), Err(StabilityError::SeriesTooShort(5)));
        assert!(PhaseSeries::new(1.0, vec![0.0; 3]).is_err());
        assert!(PhaseSeries::new(0.0, vec![0.0; 5]).is_err());
    }

    #[test]
    fn octaves() {
        assert_eq!(octave_factors(13, 3), vec![1, 2, 4]);
        assert_eq!(octave_factors(9, 2), vec![1, 2, 4]);
    }

    #[test]
    fn exact_power_laws() {
        let taus: Vec<f64> = (0..8).map(|i| 2f64.powi(i)).collect();
        let (b, se) = fit_slope(&curve(&taus, |t| 3.0 / t.sqrt()), None).unwrap();
        assert!((b + 0.5).abs() < 1e-12 && se < 1e-12);
        let (b, _) = fit_slope(&curve(&taus, |t| 1e-17 / t), None).unwrap();
        assert!((b + 1.0).abs() < 1e-12);
        assert!(matches!(
            fit_slope(&curve(&taus, |t| t), Some((1.0, 2.0))),
            Err(StabilityError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn zero_level_is_constant() {
        let s = synthesize_noise(NoiseKind::WhitePm, 0.0, 1.0, 10, 1).unwrap();
        assert!(s.x_s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn confidence_brackets_estimate() {
        let s = synthesize_noise(NoiseKind::WhitePm, 1e-12, 1.0, 1000, 5).unwrap();
        for p in tdev(&s, &octave_factors(1000, 3)).unwrap().points {
            assert!(p.ci_lo < p.deviation && p.deviation < p.ci_hi);
        }
    }
}
