//! Analytic-vs-empirical report written by `simulate`.

use hollowlink_core::coexistence::{
    accidental_rate, car, correlated_accidental_rate, correlated_car, singles_rates, true_coincidence_rate,
    CoexistenceScenario,
};
use hollowlink_core::coincidence::{estimate_car, CoincidenceError, DelayEstimate};
use hollowlink_core::sim::TimeTagStream;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Row {
    pub direction: &'static str,
    pub quantity: &'static str,
    pub analytic: Option<f64>,
    pub empirical: Option<f64>,
    pub sigma: Option<f64>,
    /// `(empirical - analytic) / sigma`.
    pub z: Option<f64>,
}

impl Row {
    fn new(direction: &'static str, quantity: &'static str, analytic: Option<f64>, empirical: Option<f64>, sigma: Option<f64>) -> Self {
        let z = match (analytic, empirical, sigma) {
            (Some(a), Some(e), Some(s)) if s > 0.0 => Some((e - a) / s),
            _ => None,
        };
        Self {
            direction,
            quantity,
            analytic: analytic.filter(|v| v.is_finite()),
            empirical: empirical.filter(|v| v.is_finite()),
            sigma: sigma.filter(|v| v.is_finite()),
            z,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DirectionReport {
    pub direction: &'static str,
    pub local_channel: u16,
    pub remote_channel: u16,
    pub delay_ps: f64,
    pub delay_stderr_ps: f64,
    pub peak_sigma_ps: Option<f64>,
    pub histogram_bin_ps: i64,
    pub histogram_file: String,
    /// The model has no accidentals, so its CAR is unbounded.
    pub car_unbounded: bool,
    /// The histogram shows no background under the window.
    pub empirical_car_unbounded: bool,
}

/// Compares one direction's streams and delay estimate with the model.
pub fn compare(
    direction: &'static str,
    s: &CoexistenceScenario,
    local: &TimeTagStream,
    remote: &TimeTagStream,
    est: &DelayEstimate,
    histogram_file: String,
) -> (DirectionReport, Vec<Row>) {
    let t = local.duration_s();
    let singles = singles_rates(s);
    let mut rows = vec![
        Row::new(
            direction,
            "local_singles_cps",
            Some(singles.local_measured),
            Some(local.len() as f64 / t),
            Some((local.len() as f64).sqrt() / t),
        ),
        Row::new(
            direction,
            "remote_singles_cps",
            Some(singles.remote_measured),
            Some(remote.len() as f64 / t),
            Some((remote.len() as f64).sqrt() / t),
        ),
    ];

    let h = &est.histogram;
    let bin = h.bin_width_ps as f64;
    let analytic_car = correlated_car(s).ok();
    let mut empirical_unbounded = false;
    if let Some(fit) = &est.fit {
        let side_bins = h.n_bins() as f64;
        let bg_model = correlated_accidental_rate(s) * t * bin / s.window_ps;
        rows.push(Row::new(
            direction,
            "background_per_bin",
            Some(bg_model),
            Some(fit.background_per_bin),
            Some((fit.background_per_bin.max(bg_model) / side_bins).sqrt()),
        ));
        rows.push(Row::new(
            direction,
            "background_per_bin_product_model",
            Some(accidental_rate(s) * t * bin / s.window_ps),
            Some(fit.background_per_bin),
            Some((fit.background_per_bin.max(bg_model) / side_bins).sqrt()),
        ));
        match estimate_car(h, fit, s.window_ps) {
            Ok(c) => {
                let excess = c.window_counts as f64 - c.background_counts;
                rows.push(Row::new(
                    direction,
                    "window_coincidences",
                    Some(true_coincidence_rate(s) * t),
                    Some(excess),
                    Some((c.window_counts as f64).sqrt()),
                ));
                rows.push(Row::new(direction, "car", analytic_car, Some(c.car), Some(c.stderr)));
                rows.push(Row::new(direction, "car_product_model", car(s).ok(), Some(c.car), Some(c.stderr)));
            }
            Err(CoincidenceError::ZeroBackground) => {
                empirical_unbounded = true;
                rows.push(Row::new(direction, "car", analytic_car, None, None));
            }
            Err(_) => rows.push(Row::new(direction, "car", analytic_car, None, None)),
        }
    }

    let report = DirectionReport {
        direction,
        local_channel: local.channel_id,
        remote_channel: remote.channel_id,
        delay_ps: est.delay_ps,
        delay_stderr_ps: est.stderr_ps,
        peak_sigma_ps: est.fit.map(|f| f.sigma_ps),
        histogram_bin_ps: h.bin_width_ps,
        histogram_file,
        car_unbounded: analytic_car.is_none() && accidental_rate(s) == 0.0,
        empirical_car_unbounded: empirical_unbounded,
    };
    (report, rows)
}

#[derive(Debug, Serialize)]
pub struct ClockReport {
    pub offset_ps: f64,
    pub drift_ps_per_s: f64,
    pub white_pm_ps: f64,
}

#[derive(Debug, Serialize)]
pub struct TwoWay {
    pub offset_ps: f64,
    pub offset_stderr_ps: f64,
    pub delay_ps: f64,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub scenario_sha256: String,
    pub seed: u64,
    pub duration_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_unix_s: Option<u64>,
    pub sign_convention: &'static str,
    pub injected_clock_error: ClockReport,
    pub directions: Vec<DirectionReport>,
    pub two_way: TwoWay,
    pub comparison: Vec<Row>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

/// Plain-text version of the comparison table.
pub fn table(rows: &[Row]) -> String {
    let mut out = format!(
        "{:<8} {:<34} {:>16} {:>16} {:>14} {:>9}\n",
        "dir", "quantity", "analytic", "empirical", "sigma", "z"
    );
    for r in rows {
        out += &format!(
            "{:<8} {:<34} {:>16} {:>16} {:>14} {:>9}\n",
            r.direction,
            r.quantity,
            cell(r.analytic),
            cell(r.empirical),
            cell(r.sigma),
            r.z.map(|z| format!("{z:.2}")).unwrap_or_else(|| "-".into())
        );
    }
    out
}
