//! Cross-correlation of two timestamp streams, Gaussian peak fitting,
//! empirical CAR, and two-stage (coarse/fine) delay extraction.
//!
//! Histograms are binned in lag `t_b - t_a`. Bin edges are computed in
//! doubled integer coordinates, so an odd bin width with an odd bin count
//! puts every edge on a half picosecond: no integer lag ever sits on an edge
//! and swapping the two streams mirrors the histogram exactly.

use thiserror::Error;

use crate::sim::TimeTagStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoincidenceError {
    #[error("timestamps are not sorted (stream {stream}, index {index})")]
    UnsortedInput { stream: char, index: usize },
    #[error("bin width must be positive")]
    ZeroBinWidth,
    #[error("histogram range must be positive")]
    EmptyRange,
    #[error("histogram has {0} bins; at least 5 are needed for a fit")]
    TooFewBins(usize),
    #[error("no significant coincidence peak (max {max} over background {background})")]
    NoPeak { max: u64, background: f64 },
    #[error("peak fit did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("background is zero; CAR is unbounded")]
    ZeroBackground,
}

/// Lag histogram of `t_b - t_a` around `center_offset_ps`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: i64,
    pub center_offset_ps: i64,
    pub counts: Vec<u64>,
    /// Total span, `counts.len() * bin_width_ps`.
    pub range_ps: i64,
    pub n_a: usize,
    pub n_b: usize,
    pub duration_ps: i64,
}

impl CoincidenceHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Lag at the center of bin `k`.
    pub fn bin_center_ps(&self, k: usize) -> f64 {
        self.center_offset_ps as f64 + self.bin_offset_ps(k)
    }

    /// Bin center relative to `center_offset_ps`.
    pub fn bin_offset_ps(&self, k: usize) -> f64 {
        let w = self.bin_width_ps as f64;
        -0.5 * self.range_ps as f64 + (k as f64 + 0.5) * w
    }
}

fn check_sorted(tags: &[i64], stream: char) -> Result<(), CoincidenceError> {
    match tags.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(CoincidenceError::UnsortedInput { stream, index: i + 1 }),
        None => Ok(()),
    }
}

/// Histogram of pairwise lags within `center_ps +- range_ps / 2`, by a
/// sorted two-pointer sweep. `range_ps` is rounded up to a whole number of
/// bins; the upper edge is inclusive.
pub fn cross_correlate_tags(
    a: &[i64],
    b: &[i64],
    bin_width_ps: i64,
    range_ps: i64,
    center_ps: i64,
) -> Result<CoincidenceHistogram, CoincidenceError> {
    if bin_width_ps <= 0 {
        return Err(CoincidenceError::ZeroBinWidth);
    }
    if range_ps <= 0 {
        return Err(CoincidenceError::EmptyRange);
    }
    check_sorted(a, 'a')?;
    check_sorted(b, 'b')?;
    let n_bins = ((range_ps + bin_width_ps - 1) / bin_width_ps) as usize;
    let span = n_bins as i64 * bin_width_ps;
    // doubled coordinates: lag window is [lo2 / 2, hi2 / 2]
    let lo2 = 2 * center_ps - span;
    let hi2 = 2 * center_ps + span;
    let lo_off = -(-lo2).div_euclid(2);
    let hi_off = hi2.div_euclid(2);
    let two_w = 2 * bin_width_ps;
    let last = n_bins - 1;

    let mut counts = vec![0u64; n_bins];
    let mut start = 0usize;
    for &ta in a {
        let first = ta + lo_off;
        while start < b.len() && b[start] < first {
            start += 1;
        }
        let limit = ta + hi_off;
        for &tb in &b[start..] {
            if tb > limit {
                break;
            }
            let k = ((2 * (tb - ta) - lo2) / two_w) as usize;
            counts[k.min(last)] += 1;
        }
    }
    let duration_ps = match (a.first(), a.last(), b.first(), b.last()) {
        (Some(a0), Some(a1), Some(b0), Some(b1)) => (*a1.max(b1) - *a0.min(b0)).max(0),
        _ => 0,
    };
    Ok(CoincidenceHistogram {
        bin_width_ps,
        center_offset_ps: center_ps,
        counts,
        range_ps: span,
        n_a: a.len(),
        n_b: b.len(),
        duration_ps,
    })
}

pub fn cross_correlate(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin_width_ps: i64,
    range_ps: i64,
    center_ps: i64,
) -> Result<CoincidenceHistogram, CoincidenceError> {
    let mut h = cross_correlate_tags(a.tags(), b.tags(), bin_width_ps, range_ps, center_ps)?;
    h.duration_ps = a.duration_ps.max(b.duration_ps);
    Ok(h)
}

/// Every lag `t_b - t_a` in `[lo_ps, hi_ps]`, in sweep order.
pub fn pair_lags(a: &[i64], b: &[i64], lo_ps: i64, hi_ps: i64) -> Vec<i64> {
    let mut out = Vec::new();
    let mut start = 0usize;
    for &ta in a {
        while start < b.len() && b[start] < ta + lo_ps {
            start += 1;
        }
        for &tb in &b[start..] {
            if tb > ta + hi_ps {
                break;
            }
            out.push(tb - ta);
        }
    }
    out
}

/// Gaussian-plus-flat fit of a coincidence peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFit {
    pub centroid_ps: f64,
    pub stderr_ps: f64,
    pub sigma_ps: f64,
    pub amplitude_per_bin: f64,
    pub background_per_bin: f64,
    /// Pearson chi-square per degree of freedom.
    pub reduced_chi2: f64,
    pub iterations: usize,
}

impl PeakFit {
    /// Expected counts in the whole Gaussian.
    pub fn peak_counts(&self, bin_width_ps: i64) -> f64 {
        self.amplitude_per_bin * self.sigma_ps * (2.0 * std::f64::consts::PI).sqrt() / bin_width_ps as f64
    }
}

pub const FIT_MAX_ITERATIONS: usize = 200;
pub const FIT_RELATIVE_STEP: f64 = 1e-8;
/// Significance (in Poisson sigmas above the median) a peak must reach.
pub const PEAK_SIGNIFICANCE: f64 = 5.0;

const MODEL_FLOOR: f64 = 1e-9;

fn median(counts: &[u64]) -> f64 {
    let mut v = counts.to_vec();
    let n = v.len();
    let (below, &mut upper, _) = v.select_nth_unstable(n / 2);
    if n % 2 == 1 {
        upper as f64
    } else {
        let lower = below.iter().copied().max().unwrap_or(upper);
        0.5 * (lower + upper) as f64
    }
}

/// Peak location: center of the maximum bin, averaging over exact ties so
/// the result mirrors with the data.
fn peak_location(h: &CoincidenceHistogram) -> (u64, f64, usize) {
    let max = h.counts.iter().copied().max().unwrap_or(0);
    let tied: Vec<usize> = (0..h.n_bins()).filter(|&k| h.counts[k] == max).collect();
    let mean = tied.iter().map(|&k| h.bin_offset_ps(k)).sum::<f64>() / tied.len() as f64;
    let k = tied[tied.len() / 2];
    (max, mean, k)
}

fn significance_check(h: &CoincidenceHistogram) -> Result<(u64, f64, f64, usize), CoincidenceError> {
    if h.n_bins() < 5 {
        return Err(CoincidenceError::TooFewBins(h.n_bins()));
    }
    let bg = median(&h.counts);
    let (max, loc, k) = peak_location(h);
    if (max as f64) < bg + PEAK_SIGNIFICANCE * bg.max(1.0).sqrt() {
        return Err(CoincidenceError::NoPeak { max, background: bg });
    }
    Ok((max, bg, loc, k))
}

#[derive(Clone, Copy)]
struct Params {
    amp: f64,
    mu: f64,
    sigma: f64,
    bg: f64,
}

impl Params {
    fn to_array(self) -> [f64; 4] {
        [self.amp, self.mu, self.sigma, self.bg]
    }

    fn from_array(p: [f64; 4], min_sigma: f64) -> Self {
        Self {
            amp: p[0].max(0.0),
            mu: p[1],
            sigma: p[2].max(min_sigma),
            bg: p[3].max(0.0),
        }
    }

    fn eval(&self, x: f64) -> (f64, [f64; 4]) {
        let dx = x - self.mu;
        let s2 = self.sigma * self.sigma;
        let g = (-0.5 * dx * dx / s2).exp();
        let m = self.amp * g + self.bg;
        let jac = [
            g,
            self.amp * g * dx / s2,
            self.amp * g * dx * dx / (s2 * self.sigma),
            1.0,
        ];
        (m, jac)
    }
}

fn deviance(p: &Params, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let m = p.eval(x).0.max(MODEL_FLOOR);
            let t = if y > 0.0 { y * (y / m).ln() } else { 0.0 };
            2.0 * (t - (y - m))
        })
        .sum()
}

/// Solves the 4x4 symmetric positive definite system by Cholesky.
fn solve4(a: [[f64; 4]; 4], b: [f64; 4]) -> Option<[f64; 4]> {
    let mut l = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0; 4];
    for i in 0..4 {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0; 4];
    for i in (0..4).rev() {
        let mut s = y[i];
        for k in i + 1..4 {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

fn invert4(a: [[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut inv = [[0.0; 4]; 4];
    for c in 0..4 {
        let mut e = [0.0; 4];
        e[c] = 1.0;
        let col = solve4(a, e)?;
        for r in 0..4 {
            inv[r][c] = col[r];
        }
    }
    Some(inv)
}

/// Fisher matrix `J^T W J` and score `J^T W (y - m)` with Poisson weights
/// `W = 1 / m` at the current parameters.
fn normal_equations(p: &Params, xs: &[f64], ys: &[f64]) -> ([[f64; 4]; 4], [f64; 4]) {
    let mut h = [[0.0; 4]; 4];
    let mut g = [0.0; 4];
    for (&x, &y) in xs.iter().zip(ys) {
        let (m, j) = p.eval(x);
        let w = 1.0 / m.max(MODEL_FLOOR);
        let r = y - m;
        for a in 0..4 {
            g[a] += w * j[a] * r;
            for b in 0..=a {
                h[a][b] += w * j[a] * j[b];
            }
        }
    }
    for a in 0..4 {
        for b in a + 1..4 {
            h[a][b] = h[b][a];
        }
    }
    (h, g)
}

/// Fits `A exp(-(x - mu)^2 / 2 sigma^2) + B` to the histogram.
///
/// Levenberg-Marquardt on Poisson-weighted residuals, with the weights
/// refreshed every iteration (iteratively reweighted least squares); the
/// centroid error comes from the inverse Fisher matrix and approaches
/// `sigma / sqrt(N_peak)` on a negligible background. Initial guess:
/// amplitude from the maximum bin, centroid at its center, width from the
/// half-maximum extent, background from the median bin.
pub fn fit_peak(h: &CoincidenceHistogram) -> Result<PeakFit, CoincidenceError> {
    let (max, bg0, loc, kmax) = significance_check(h)?;
    let w = h.bin_width_ps as f64;
    let xs: Vec<f64> = (0..h.n_bins()).map(|k| h.bin_offset_ps(k)).collect();
    let ys: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();

    let amp0 = (max as f64 - bg0).max(1.0);
    let half = bg0 + 0.5 * amp0;
    let mut lo = kmax;
    while lo > 0 && ys[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = kmax;
    while hi + 1 < ys.len() && ys[hi + 1] >= half {
        hi += 1;
    }
    let fwhm = (hi - lo + 1) as f64 * w;
    let min_sigma = 1e-3 * w;
    let mut p = Params {
        amp: amp0,
        mu: loc,
        sigma: (fwhm / crate::link::FWHM_PER_SIGMA).max(min_sigma),
        bg: bg0,
    };
    let scale = [1.0, w, w, 1.0];

    let mut lambda = 1e-3;
    let mut cost = deviance(&p, &xs, &ys);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < FIT_MAX_ITERATIONS {
        iterations += 1;
        let (hess, grad) = normal_equations(&p, &xs, &ys);
        let cur = p.to_array();
        let mut accepted = None;
        while lambda < 1e12 {
            let mut damped = hess;
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * hess[i][i].max(1e-12);
            }
            if let Some(step) = solve4(damped, grad) {
                let mut next = cur;
                for i in 0..4 {
                    next[i] += step[i];
                }
                let cand = Params::from_array(next, min_sigma);
                let c = deviance(&cand, &xs, &ys);
                // equal within rounding still counts as downhill, so the
                // iteration is not stalled by deviance round-off
                if c.is_finite() && c <= cost + 1e-12 * cost.abs().max(1.0) {
                    accepted = Some((cand, c));
                    lambda = (lambda * 0.1).max(1e-12);
                    break;
                }
            }
            lambda *= 10.0;
        }
        match accepted {
            Some((cand, c)) => {
                let next = cand.to_array();
                let small = (0..4).all(|i| (next[i] - cur[i]).abs() <= FIT_RELATIVE_STEP * (cur[i].abs() + scale[i]));
                p = cand;
                cost = c;
                if small {
                    converged = true;
                    break;
                }
            }
            None => {
                // no downhill step at any damping: stationary point
                converged = true;
                break;
            }
        }
    }
    if !converged || !(p.sigma > min_sigma) || !(p.amp > 0.0) {
        return Err(CoincidenceError::NoConvergence(iterations));
    }

    let (hess, _) = normal_equations(&p, &xs, &ys);
    let cov = invert4(hess).ok_or(CoincidenceError::NoConvergence(iterations))?;
    let chi2: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let m = p.eval(x).0.max(MODEL_FLOOR);
            (y - m) * (y - m) / m
        })
        .sum();
    let dof = (xs.len() as f64 - 4.0).max(1.0);
    Ok(PeakFit {
        centroid_ps: h.center_offset_ps as f64 + p.mu,
        stderr_ps: cov[1][1].max(0.0).sqrt(),
        sigma_ps: p.sigma,
        amplitude_per_bin: p.amp,
        background_per_bin: p.bg,
        reduced_chi2: chi2 / dof,
        iterations,
    })
}

/// Empirical coincidence-to-accidental ratio with its Poisson error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarEstimate {
    pub car: f64,
    pub stderr: f64,
    /// Counts in the bins whose centers fall inside the window.
    pub window_counts: u64,
    /// Expected background in those bins.
    pub background_counts: f64,
    pub window_bins: usize,
}

/// `(N_window - B) / B` with `B` the fitted background over the bins inside
/// a window of full width `window_ps` centered on the fitted centroid. When
/// the window is a whole number of bins, `B = background * window / bin`.
pub fn estimate_car(h: &CoincidenceHistogram, fit: &PeakFit, window_ps: f64) -> Result<CarEstimate, CoincidenceError> {
    let half = 0.5 * window_ps;
    let inside: Vec<usize> = (0..h.n_bins())
        .filter(|&k| (h.bin_center_ps(k) - fit.centroid_ps).abs() <= half)
        .collect();
    let window_counts: u64 = inside.iter().map(|&k| h.counts[k]).sum();
    let sideband: u64 = h.total() - window_counts;
    let b = fit.background_per_bin * inside.len() as f64;
    if !(b > 0.0) || sideband == 0 {
        return Err(CoincidenceError::ZeroBackground);
    }
    let n = window_counts as f64;
    let car = (n - b) / b;
    let var = n / (b * b) + (n / b).powi(2) / sideband as f64;
    Ok(CarEstimate {
        car,
        stderr: var.sqrt(),
        window_counts,
        background_counts: b,
        window_bins: inside.len(),
    })
}

/// Two-stage delay search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    /// Center of the coarse search, ps.
    pub center_ps: i64,
    pub coarse_half_range_ps: i64,
    pub coarse_bin_ps: i64,
    pub fine_half_range_ps: i64,
    pub fine_bin_ps: i64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            center_ps: 0,
            coarse_half_range_ps: 1_000_000_000,
            coarse_bin_ps: 1001,
            fine_half_range_ps: 10_000,
            fine_bin_ps: 25,
        }
    }
}

impl ExtractConfig {
    /// Narrow search around a known delay, for tracking.
    pub fn tracking(center_ps: i64, half_range_ps: i64) -> Self {
        Self {
            center_ps,
            coarse_half_range_ps: half_range_ps,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayEstimate {
    pub delay_ps: f64,
    pub stderr_ps: f64,
    /// Absent when the peak was narrower than one fine bin and the mean of
    /// the raw lags was used instead.
    pub fit: Option<PeakFit>,
    /// Fine histogram the estimate came from.
    pub histogram: CoincidenceHistogram,
}

fn odd(v: i64) -> i64 {
    let v = v.max(1);
    if v % 2 == 0 {
        v - 1
    } else {
        v
    }
}

fn odd_bins_covering(half_range: i64, bin: i64) -> i64 {
    let n = ((2 * half_range + bin - 1) / bin).max(5);
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

fn centered_histogram(a: &[i64], b: &[i64], center: i64, half_range: i64, bin: i64) -> Result<CoincidenceHistogram, CoincidenceError> {
    let bin = odd(bin);
    let n = odd_bins_covering(half_range, bin);
    cross_correlate_tags(a, b, bin, n * bin, center)
}

/// Excess counts concentrated in a single bin: the peak is unresolved.
fn unresolved(h: &CoincidenceHistogram, bg: f64, kmax: usize) -> bool {
    let excess: f64 = h.counts.iter().map(|&c| (c as f64 - bg).max(0.0)).sum();
    excess > 0.0 && (h.counts[kmax] as f64 - bg) >= 0.9 * excess
}

fn raw_mean(a: &[i64], b: &[i64], h: &CoincidenceHistogram, k: usize) -> (f64, f64) {
    let c = h.bin_center_ps(k);
    let half = 0.5 * h.bin_width_ps as f64;
    let lags = pair_lags(a, b, (c - half).ceil() as i64, (c + half).floor() as i64);
    let n = lags.len() as f64;
    let mean = lags.iter().map(|&l| l as f64).sum::<f64>() / n;
    let var = lags.iter().map(|&l| (l as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Delay of `b` relative to `a` (the lag `t_b - t_a` of the correlation
/// peak). A coarse histogram over the full search range locates the peak;
/// a fine histogram around it is fitted, and refitted with bins no wider
/// than a fifth of the fitted width.
pub fn extract_delay_tags(a: &[i64], b: &[i64], cfg: &ExtractConfig) -> Result<DelayEstimate, CoincidenceError> {
    let coarse = centered_histogram(a, b, cfg.center_ps, cfg.coarse_half_range_ps, cfg.coarse_bin_ps)?;
    let (_, _, loc, _) = significance_check(&coarse)?;
    let center = cfg.center_ps + loc.round() as i64;
    let half = cfg.fine_half_range_ps.max(3 * coarse.bin_width_ps);

    let mut fine = centered_histogram(a, b, center, half, cfg.fine_bin_ps)?;
    for _ in 0..2 {
        let (_, bg, _, kmax) = significance_check(&fine)?;
        if unresolved(&fine, bg, kmax) {
            let (delay, stderr) = raw_mean(a, b, &fine, kmax);
            return Ok(DelayEstimate {
                delay_ps: delay,
                stderr_ps: stderr,
                fit: None,
                histogram: fine,
            });
        }
        let fit = fit_peak(&fine)?;
        let wanted = odd((fit.sigma_ps / 5.0).floor() as i64);
        if wanted >= fine.bin_width_ps || fine.bin_width_ps == 1 {
            return Ok(DelayEstimate {
                delay_ps: fit.centroid_ps,
                stderr_ps: fit.stderr_ps,
                fit: Some(fit),
                histogram: fine,
            });
        }
        fine = centered_histogram(a, b, fit.centroid_ps.round() as i64, half, wanted)?;
    }
    let fit = fit_peak(&fine)?;
    Ok(DelayEstimate {
        delay_ps: fit.centroid_ps,
        stderr_ps: fit.stderr_ps,
        fit: Some(fit),
        histogram: fine,
    })
}

pub fn extract_delay(a: &TimeTagStream, b: &TimeTagStream, cfg: &ExtractConfig) -> Result<DelayEstimate, CoincidenceError> {
    let mut est = extract_delay_tags(a.tags(), b.tags(), cfg)?;
    est.histogram.duration_ps = a.duration_ps.max(b.duration_ps);
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_histogram(center_bin: f64, sigma_bins: f64, amp: f64, bg: f64, n: usize, w: i64) -> CoincidenceHistogram {
        let counts = (0..n)
            .map(|k| {
                let x = k as f64 - center_bin;
                (amp * (-0.5 * x * x / (sigma_bins * sigma_bins)).exp() + bg).round() as u64
            })
            .collect();
        CoincidenceHistogram {
            bin_width_ps: w,
            center_offset_ps: 0,
            counts,
            range_ps: n as i64 * w,
            n_a: 0,
            n_b: 0,
            duration_ps: 0,
        }
    }

    #[test]
    fn shifted_copy_fills_one_bin() {
        let a: Vec<i64> = (0..100).map(|i| i * 1_000_000 + (i * 7919) % 1000).collect();
        let b: Vec<i64> = a.iter().map(|t| t + 5_000).collect();
        let h = cross_correlate_tags(&a, &b, 11, 11 * 101, 5_000).unwrap();
        assert_eq!(h.total(), 100);
        assert_eq!(h.counts[50], 100);
    }

    #[test]
    fn errors() {
        assert_eq!(cross_correlate_tags(&[0], &[0], 0, 10, 0), Err(CoincidenceError::ZeroBinWidth));
        assert!(matches!(
            cross_correlate_tags(&[3, 1], &[0], 1, 10, 0),
            Err(CoincidenceError::UnsortedInput { stream: 'a', .. })
        ));
    }

    #[test]
    fn noiseless_symmetric_fit() {
        let h = gaussian_histogram(40.0, 6.0, 1000.0, 5.0, 81, 25);
        let fit = fit_peak(&h).unwrap();
        let expect = h.bin_center_ps(40);
        assert!((fit.centroid_ps - expect).abs() < 1e-3 * 25.0, "{fit:?}");
        assert!((fit.sigma_ps - 150.0).abs() < 2.0);
        assert!((fit.background_per_bin - 5.0).abs() < 0.5);
    }

    #[test]
    fn flat_histogram_has_no_peak() {
        let h = gaussian_histogram(40.0, 6.0, 0.0, 10.0, 81, 25);
        assert!(matches!(fit_peak(&h), Err(CoincidenceError::NoPeak { .. })));
    }

    #[test]
    fn tiny_histogram_rejected() {
        let h = gaussian_histogram(1.0, 1.0, 100.0, 0.0, 3, 25);
        assert_eq!(fit_peak(&h), Err(CoincidenceError::TooFewBins(3)));
    }

    #[test]
    fn car_of_flat_histogram_is_zero() {
        let h = gaussian_histogram(40.0, 6.0, 0.0, 100.0, 81, 25);
        let fit = PeakFit {
            centroid_ps: h.bin_center_ps(40),
            stderr_ps: 1.0,
            sigma_ps: 150.0,
            amplitude_per_bin: 0.0,
            background_per_bin: 100.0,
            reduced_chi2: 1.0,
            iterations: 1,
        };
        let est = estimate_car(&h, &fit, 1000.0).unwrap();
        assert_eq!(est.window_bins, 41);
        assert!(est.car.abs() < 1e-12);
        let empty = CoincidenceHistogram {
            counts: vec![0; 81],
            ..h
        };
        assert_eq!(
            estimate_car(&empty, &PeakFit { background_per_bin: 0.0, ..fit }, 1000.0),
            Err(CoincidenceError::ZeroBackground)
        );
    }

    #[test]
    fn zero_jitter_delay_is_exact() {
        let a: Vec<i64> = (0..500).map(|i| i * 2_000_003 + (i * i) % 977).collect();
        let d = 123_456_789;
        let b: Vec<i64> = a.iter().map(|t| t + d).collect();
        let est = extract_delay_tags(&a, &b, &ExtractConfig::default()).unwrap();
        assert_eq!(est.delay_ps, d as f64);
        assert_eq!(est.stderr_ps, 0.0);
        let back = extract_delay_tags(&b, &a, &ExtractConfig::default()).unwrap();
        assert_eq!(back.delay_ps, -(d as f64));
    }
}
