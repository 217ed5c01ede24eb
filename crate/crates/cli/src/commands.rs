use std::fs;
use std::io::Write;
use std::path::Path;

use hollowlink_core::coexistence::{grid, linspace, max_distance as reach, project_reach, ProjectionToggle};
use hollowlink_core::coincidence::{extract_delay, ExtractConfig};
use hollowlink_core::config::{preset, PRESETS};
use hollowlink_core::io::{
    read_offsets_csv, write_car_csv, write_histogram_csv, write_offsets_csv, write_stability_csv,
    write_timetags_binary, write_timetags_csv, OffsetHeader, SIGN_CONVENTION,
};
use hollowlink_core::sim::run_scenario;
use hollowlink_core::stability::{
    adev, fit_slope, mdev, octave_factors, synthesize_noise, tdev, NoiseKind, PhaseSeries, StabilityCurve,
};
use hollowlink_core::twtt::{run_session_with, two_way_combine, SessionConfig};
use rayon::prelude::*;

use crate::cli::*;
use crate::summary::{compare, table, ClockReport, Summary, TwoWay};
use crate::{load_scenario, open_output, plot, resolve_seed, scenario_hash, unix_now, Failure};

pub fn presets(name: Option<&str>) -> Result<(), Failure> {
    let mut out = open_output(None)?;
    match name {
        Some(n) => {
            let p = preset(n).ok_or_else(|| Failure::Config(format!("unknown preset `{n}`")))?;
            out.write_all(p.text.as_bytes())?;
        }
        None => {
            for p in PRESETS {
                writeln!(out, "{:<18} {}", p.name, p.summary)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `x` or `min:max:n`.
fn axis(spec: Option<&str>, default: f64, what: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Config(format!("--{what} expects a value or min:max:n, got `{}`", spec.unwrap_or("")));
    let Some(spec) = spec else {
        return Ok(vec![default]);
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [v] => {
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad());
            }
            Ok(vec![v])
        }
        [lo, hi, n] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi && n >= 2) {
                return Err(Failure::Config(format!(
                    "--{what}: need 0 <= min < max and n >= 2, got `{spec}`"
                )));
            }
            Ok(linspace(lo, hi, n))
        }
        _ => Err(bad()),
    }
}

pub fn car_scan(a: &CarScanArgs) -> Result<(), Failure> {
    let cfg = load_scenario(&a.scenario)?;
    let s = cfg.scenario;
    let lengths = axis(a.length.as_deref(), s.link.length_km, "length")?;
    let powers = axis(a.power.as_deref(), s.power_mw(), "power")?;
    let points = grid(&s, &lengths, &powers)?;
    let mut out = open_output(a.out.as_deref())?;
    write_car_csv(&mut out, &points)?;
    out.flush()?;
    if let (Some(script), Some(csv)) = (&a.gnuplot, &a.out) {
        fs::write(script, plot::car_scan_script(csv, lengths.len(), powers.len()))?;
    }
    Ok(())
}

pub fn max_distance(a: &MaxDistanceArgs) -> Result<(), Failure> {
    let cfg = load_scenario(&a.scenario)?;
    let s = cfg.scenario;
    let powers = if a.power.is_empty() { vec![s.power_mw()] } else { a.power.clone() };
    if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Failure::Config("--power values must be finite and >= 0".into()));
    }
    let toggles: Vec<ProjectionToggle> = if a.toggles {
        ProjectionToggle::ALL.to_vec()
    } else {
        vec![ProjectionToggle::AsConfigured]
    };
    let cal_power = a.calibrate_power.unwrap_or(s.power_mw());
    let cells: Vec<(ProjectionToggle, f64)> = toggles
        .iter()
        .flat_map(|&t| powers.iter().map(move |&p| (t, p)))
        .collect();
    let rows: Vec<Result<(ProjectionToggle, f64, f64, f64, bool), Failure>> = cells
        .par_iter()
        .map(|&(t, p)| {
            let (thr, d) = match (a.threshold, a.calibrate_km) {
                (Some(thr), _) => (thr, reach(&t.apply(&s).with_power(p), thr, a.l_max)?),
                (None, Some(km)) => {
                    let pr = project_reach(&s, t, cal_power, km, p, a.l_max)?;
                    (pr.threshold, pr.reach)
                }
                (None, None) => return Err(Failure::Config("--threshold or --calibrate-km is required".into())),
            };
            Ok((t, p, thr, d.distance_km, d.not_reachable))
        })
        .collect();
    let mut out = open_output(a.out.as_deref())?;
    writeln!(out, "variant,power_mw,car_threshold,max_distance_km,not_reachable")?;
    for r in rows {
        let (t, p, thr, d, nr) = r?;
        writeln!(out, "{},{},{},{},{}", t.name(), p, thr, d, nr)?;
    }
    out.flush()?;
    Ok(())
}

fn acquisition(center_ps: i64, search_ps: i64) -> Result<ExtractConfig, Failure> {
    if search_ps <= 0 {
        return Err(Failure::Config("--search-ps must be > 0".into()));
    }
    Ok(ExtractConfig {
        center_ps,
        coarse_half_range_ps: search_ps,
        ..ExtractConfig::default()
    })
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let mut cfg = load_scenario(&a.scenario)?;
    if let Some(d) = a.run.duration {
        cfg.run.duration_s = d;
    }
    let seed = resolve_seed(a.run.seed, cfg.run.seed)?;
    let run = cfg.sim_run(seed)?;
    let hash = scenario_hash(&cfg);
    let streams = run_scenario(&run)?;

    fs::create_dir_all(&a.out_dir)?;
    let dir = &a.out_dir;
    let named = [
        ("idler_a", &streams.idler_a),
        ("signal_at_b", &streams.signal_at_b),
        ("idler_b", &streams.idler_b),
        ("signal_at_a", &streams.signal_at_a),
    ];
    match a.format {
        TagFormat::Binary => {
            for (name, s) in named {
                let mut f = open_output(Some(&dir.join(format!("{name}.qtags"))))?;
                write_timetags_binary(&mut f, s)?;
                f.flush()?;
            }
        }
        TagFormat::Csv => {
            let mut f = open_output(Some(&dir.join("timetags.csv")))?;
            write_timetags_csv(&mut f, &named.map(|(_, s)| s))?;
            f.flush()?;
        }
    }

    let dirs = [
        ("a_to_b", run.scenario, &streams.idler_a, &streams.signal_at_b, run.link_delay_ab_ps),
        ("b_to_a", run.scenario.reversed(), &streams.idler_b, &streams.signal_at_a, run.link_delay_ba_ps),
    ];
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut delays = Vec::new();
    for (name, scenario, local, remote, delay) in dirs {
        let est = extract_delay(local, remote, &acquisition(delay, a.run.search_ps)?)
            .map_err(|e| Failure::Numerical(format!("{name}: {e}")))?;
        let file = format!("histogram_{name}.csv");
        let mut f = open_output(Some(&dir.join(&file)))?;
        write_histogram_csv(&mut f, &est.histogram)?;
        f.flush()?;
        let (report, r) = compare(name, &scenario, local, remote, &est, file);
        delays.push((est.delay_ps, est.stderr_ps));
        reports.push(report);
        rows.extend(r);
    }
    let (offset, delay) = two_way_combine(delays[0].0, delays[1].0);
    let summary = Summary {
        scenario_sha256: hash,
        seed,
        duration_s: run.duration_s,
        created_unix_s: (!a.run.no_timestamp).then(unix_now),
        sign_convention: SIGN_CONVENTION,
        injected_clock_error: ClockReport {
            offset_ps: run.clock_error.offset_ps,
            drift_ps_per_s: run.clock_error.drift_ps_per_s,
            white_pm_ps: run.clock_error.white_pm_sigma_ps,
        },
        directions: reports,
        two_way: TwoWay {
            offset_ps: offset,
            offset_stderr_ps: 0.5 * delays[0].1.hypot(delays[1].1),
            delay_ps: delay,
        },
        comparison: rows,
    };
    let mut f = open_output(Some(&dir.join("summary.json")))?;
    serde_json::to_writer_pretty(&mut f, &summary).map_err(|e| Failure::Config(e.to_string()))?;
    writeln!(f)?;
    f.flush()?;
    print!("{}", table(&summary.comparison));
    Ok(())
}

fn parse_range(spec: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::Config(format!("expected LO:HI, got `{spec}`"));
    let (lo, hi) = spec.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn factors_for(series: &PhaseSeries, taus: &[f64], span: usize) -> Result<Vec<usize>, Failure> {
    if taus.is_empty() {
        return Ok(octave_factors(series.len(), span));
    }
    let mut m: Vec<usize> = Vec::with_capacity(taus.len());
    for &t in taus {
        let k = (t / series.tau0_s).round();
        if !(k >= 1.0) || ((k * series.tau0_s - t).abs() > 1e-9 * t.abs().max(series.tau0_s)) {
            return Err(Failure::Config(format!(
                "tau {t} s is not a whole multiple of the sample spacing {} s",
                series.tau0_s
            )));
        }
        m.push(k as usize);
    }
    m.sort_unstable();
    m.dedup();
    Ok(m)
}

fn analyze(series: &PhaseSeries, o: &StabilityOutput) -> Result<StabilityCurve, Failure> {
    Ok(match o.measure {
        Measure::Tdev => tdev(series, &factors_for(series, &o.tau, 3)?)?,
        Measure::Mdev => mdev(series, &factors_for(series, &o.tau, 3)?)?,
        Measure::Adev => adev(series, &factors_for(series, &o.tau, 2)?)?,
    })
}

fn label(m: Measure) -> &'static str {
    match m {
        Measure::Tdev => "TDEV (s)",
        Measure::Mdev => "MDEV",
        Measure::Adev => "ADEV",
    }
}

/// Writes the curve and, on request, its slope and plot script.
fn emit_stability(curve: &StabilityCurve, o: &StabilityOutput, csv: Option<&Path>) -> Result<(), Failure> {
    let mut out = open_output(csv)?;
    write_stability_csv(&mut out, curve)?;
    out.flush()?;
    if o.fit_slope {
        let range = o.fit_range.as_deref().map(parse_range).transpose()?;
        let (slope, se) = fit_slope(curve, range)?;
        eprintln!("log-log slope: {slope:.4} +- {se:.4}");
    }
    if let Some(script) = &o.gnuplot {
        let csv = csv.ok_or_else(|| Failure::Config("--gnuplot needs the curve written to a file".into()))?;
        fs::write(script, plot::stability_script(csv, label(o.measure)))?;
    }
    Ok(())
}

pub fn twtt(a: &TwttArgs) -> Result<(), Failure> {
    let mut cfg = load_scenario(&a.scenario)?;
    if let Some(d) = a.run.duration {
        cfg.run.duration_s = d;
    }
    if let Some(i) = a.interval {
        cfg.run.interval_s = i;
    }
    let seed = resolve_seed(a.run.seed, cfg.run.seed)?;
    let run = cfg.sim_run(seed)?;
    let session = SessionConfig {
        acquisition: acquisition(run.link_delay_ab_ps, a.run.search_ps)?,
        ..SessionConfig::new(cfg.run.interval_s)
    };
    let series = run_session_with(&run, &session)?;
    let header = OffsetHeader {
        scenario_hash: scenario_hash(&cfg),
        seed,
        created_unix_s: (!a.run.no_timestamp).then(unix_now),
    };
    let mut out = open_output(a.out.as_deref())?;
    write_offsets_csv(&mut out, &series, &header)?;
    out.flush()?;
    if a.stability_out.is_some() || a.stability.fit_slope {
        let curve = analyze(&series.to_phase_series()?, &a.stability)?;
        match &a.stability_out {
            Some(p) => emit_stability(&curve, &a.stability, Some(p))?,
            None => {
                let (slope, se) = fit_slope(&curve, a.stability.fit_range.as_deref().map(parse_range).transpose()?)?;
                eprintln!("log-log slope: {slope:.4} +- {se:.4}");
            }
        }
    }
    Ok(())
}

pub fn stability(a: &StabilityArgs) -> Result<(), Failure> {
    let series = match (&a.input, a.synthetic) {
        (Some(path), _) => {
            let f = fs::File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            read_offsets_csv(std::io::BufReader::new(f))?.to_phase_series()?
        }
        (None, Some(kind)) => {
            let level = a
                .level
                .ok_or_else(|| Failure::Config("--synthetic needs --level".into()))?;
            let kind = match kind {
                Synthetic::WhitePm => NoiseKind::WhitePm,
                Synthetic::WhiteFm => NoiseKind::WhiteFm,
            };
            let seed = resolve_seed(a.seed, None)?;
            synthesize_noise(kind, level, a.tau0, a.n, seed)?
        }
        (None, None) => return Err(Failure::Config("--input or --synthetic is required".into())),
    };
    let curve = analyze(&series, &a.stability)?;
    emit_stability(&curve, &a.stability, a.out.as_deref())
}
