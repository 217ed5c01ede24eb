//! Plain-text `key = value` scenario files and the shipped presets.
//!
//! One assignment per line; `#` starts a comment. A trailing comment of the
//! form `# [MARKER] note` records where the value came from. `preset = name`
//! loads a shipped preset first, and later keys override it. Unknown keys
//! are errors. See `docs/config.md` for the key reference.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::coexistence::{CoexistenceScenario, PairSource};
use crate::link::{ClassicalCarrier, DetectorModel, FiberLink, ModelError};
use crate::sim::{default_link_delay_ps, ClockError, SimError, SimRun};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("`{key}`: {msg}")]
    UnitViolation { key: String, msg: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<ModelError> for ConfigError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::OutOfDomain { field, .. } => ConfigError::UnitViolation {
                key: field.to_string(),
                msg: e.to_string(),
            },
        }
    }
}

/// Session settings that sit next to the scenario in a config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub duration_s: f64,
    pub interval_s: f64,
    pub seed: Option<u64>,
    pub clock: ClockError,
    pub link_delay_ab_ps: Option<i64>,
    pub link_delay_ba_ps: Option<i64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            interval_s: 1.0,
            seed: None,
            clock: ClockError::default(),
            link_delay_ab_ps: None,
            link_delay_ba_ps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: CoexistenceScenario,
    pub run: RunSettings,
    /// Provenance comment per key, e.g. `[PAPER] 0.17 dB/km`.
    pub provenance: BTreeMap<String, String>,
}

impl Config {
    /// Simulation run; the file's seed wins over `default_seed`.
    pub fn sim_run(&self, default_seed: u64) -> Result<SimRun, SimError> {
        let len = self.scenario.link.length_km;
        let run = SimRun {
            scenario: self.scenario,
            duration_s: self.run.duration_s,
            seed: self.run.seed.unwrap_or(default_seed),
            clock_error: self.run.clock,
            link_delay_ab_ps: self.run.link_delay_ab_ps.unwrap_or_else(|| default_link_delay_ps(len)),
            link_delay_ba_ps: self.run.link_delay_ba_ps.unwrap_or_else(|| default_link_delay_ps(len)),
        };
        run.validate()?;
        Ok(run)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    F(f64),
    I(i64),
    U(u64),
    B(bool),
}

const SCENARIO_KEYS: &[&str] = &[
    "length_km",
    "atten_db_per_km",
    "gvd_ps_nm_km",
    "rho_fwd_cps_mw_km",
    "rho_bwd_cps_mw_km",
    "insertion_loss_db",
    "power_fwd_mw",
    "power_bwd_mw",
    "carrier_wavelength_nm",
    "pair_rate_cps",
    "arm_eff_local",
    "arm_eff_remote",
    "source_fwhm_nm",
    "local_efficiency",
    "local_dark_cps",
    "local_jitter_sigma_ps",
    "local_dead_time_ns",
    "remote_efficiency",
    "remote_dark_cps",
    "remote_jitter_sigma_ps",
    "remote_dead_time_ns",
    "window_ps",
    "dcm_engaged",
    "sprs_ref_efficiency",
];

const RUN_KEYS: &[&str] = &[
    "duration_s",
    "interval_s",
    "seed",
    "clock_offset_ps",
    "clock_drift_ps_per_s",
    "clock_white_pm_ps",
    "link_delay_ab_ps",
    "link_delay_ba_ps",
];

fn kind_of(key: &str) -> char {
    match key {
        "dcm_engaged" => 'b',
        "seed" => 'u',
        "link_delay_ab_ps" | "link_delay_ba_ps" => 'i',
        _ => 'f',
    }
}

fn parse_value(key: &str, raw: &str, line: usize) -> Result<Value, ConfigError> {
    let bad = |what: &str| ConfigError::Parse {
        line,
        msg: format!("`{key}` expects {what}, got `{raw}`"),
    };
    match kind_of(key) {
        'b' => match raw {
            "true" | "yes" | "on" => Ok(Value::B(true)),
            "false" | "no" | "off" => Ok(Value::B(false)),
            _ => Err(bad("true or false")),
        },
        'u' => raw.parse().map(Value::U).map_err(|_| bad("an unsigned integer")),
        'i' => raw.parse().map(Value::I).map_err(|_| bad("an integer")),
        _ => {
            let v: f64 = raw.parse().map_err(|_| bad("a number"))?;
            if !v.is_finite() {
                return Err(bad("a finite number"));
            }
            Ok(Value::F(v))
        }
    }
}

struct Parsed {
    values: BTreeMap<String, Value>,
    provenance: BTreeMap<String, String>,
}

fn parse_text(text: &str, depth: usize) -> Result<Parsed, ConfigError> {
    let mut values = BTreeMap::new();
    let mut provenance = BTreeMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let (body, comment) = match raw_line.find('#') {
            Some(p) => (&raw_line[..p], Some(raw_line[p + 1..].trim())),
            None => (raw_line, None),
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let (key, val) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            msg: format!("expected `key = value`, got `{body}`"),
        })?;
        let (key, val) = (key.trim(), val.trim());
        if val.is_empty() {
            return Err(ConfigError::Parse {
                line,
                msg: format!("`{key}` has no value"),
            });
        }
        if key == "preset" {
            if depth > 0 {
                return Err(ConfigError::Parse {
                    line,
                    msg: "presets cannot include other presets".into(),
                });
            }
            let p = preset(val).ok_or_else(|| ConfigError::UnknownPreset(val.to_string()))?;
            let base = parse_text(p.text, depth + 1)?;
            values.extend(base.values);
            provenance.extend(base.provenance);
            continue;
        }
        if !SCENARIO_KEYS.contains(&key) && !RUN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        values.insert(key.to_string(), parse_value(key, val, line)?);
        match comment {
            Some(c) if c.starts_with('[') => {
                provenance.insert(key.to_string(), c.to_string());
            }
            _ => {
                provenance.remove(key);
            }
        }
    }
    Ok(Parsed { values, provenance })
}

fn get_f(v: &BTreeMap<String, Value>, key: &str) -> Result<f64, ConfigError> {
    match v.get(key) {
        Some(Value::F(x)) => Ok(*x),
        _ => Err(ConfigError::MissingKey(key.to_string())),
    }
}

fn opt_f(v: &BTreeMap<String, Value>, key: &str) -> Option<f64> {
    match v.get(key) {
        Some(Value::F(x)) => Some(*x),
        _ => None,
    }
}

fn opt_i(v: &BTreeMap<String, Value>, key: &str) -> Option<i64> {
    match v.get(key) {
        Some(Value::I(x)) => Some(*x),
        _ => None,
    }
}

/// Parses config text. Every scenario key must be present after presets
/// are applied; run keys fall back to [`RunSettings::default`].
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let Parsed { values: v, provenance } = parse_text(text, 0)?;
    let dcm_engaged = match v.get("dcm_engaged") {
        Some(Value::B(b)) => *b,
        _ => return Err(ConfigError::MissingKey("dcm_engaged".into())),
    };
    let det = |side: &str| -> Result<DetectorModel, ConfigError> {
        Ok(DetectorModel {
            efficiency: get_f(&v, &format!("{side}_efficiency"))?,
            dark_rate_cps: get_f(&v, &format!("{side}_dark_cps"))?,
            jitter_sigma_ps: get_f(&v, &format!("{side}_jitter_sigma_ps"))?,
            dead_time_ns: get_f(&v, &format!("{side}_dead_time_ns"))?,
        })
    };
    let scenario = CoexistenceScenario {
        link: FiberLink {
            length_km: get_f(&v, "length_km")?,
            atten_db_per_km: get_f(&v, "atten_db_per_km")?,
            gvd_ps_nm_km: get_f(&v, "gvd_ps_nm_km")?,
            rho_fwd_cps_mw_km: get_f(&v, "rho_fwd_cps_mw_km")?,
            rho_bwd_cps_mw_km: get_f(&v, "rho_bwd_cps_mw_km")?,
            insertion_loss_db: get_f(&v, "insertion_loss_db")?,
        },
        carrier: ClassicalCarrier {
            power_fwd_mw: get_f(&v, "power_fwd_mw")?,
            power_bwd_mw: get_f(&v, "power_bwd_mw")?,
            wavelength_nm: get_f(&v, "carrier_wavelength_nm")?,
        },
        source: PairSource {
            pair_rate_cps: get_f(&v, "pair_rate_cps")?,
            arm_eff_local: get_f(&v, "arm_eff_local")?,
            arm_eff_remote: get_f(&v, "arm_eff_remote")?,
            fwhm_bandwidth_nm: get_f(&v, "source_fwhm_nm")?,
        },
        det_local: det("local")?,
        det_remote: det("remote")?,
        window_ps: get_f(&v, "window_ps")?,
        dcm_engaged,
        sprs_ref_efficiency: get_f(&v, "sprs_ref_efficiency")?,
    };
    scenario.validate()?;

    let d = RunSettings::default();
    let run = RunSettings {
        duration_s: opt_f(&v, "duration_s").unwrap_or(d.duration_s),
        interval_s: opt_f(&v, "interval_s").unwrap_or(d.interval_s),
        seed: match v.get("seed") {
            Some(Value::U(s)) => Some(*s),
            _ => None,
        },
        clock: ClockError {
            offset_ps: opt_f(&v, "clock_offset_ps").unwrap_or(0.0),
            drift_ps_per_s: opt_f(&v, "clock_drift_ps_per_s").unwrap_or(0.0),
            white_pm_sigma_ps: opt_f(&v, "clock_white_pm_ps").unwrap_or(0.0),
        },
        link_delay_ab_ps: opt_i(&v, "link_delay_ab_ps"),
        link_delay_ba_ps: opt_i(&v, "link_delay_ba_ps"),
    };
    for (key, val) in [("duration_s", run.duration_s), ("interval_s", run.interval_s)] {
        if !(val > 0.0) {
            return Err(ConfigError::UnitViolation {
                key: key.into(),
                msg: format!("must be > 0 s, got {val}"),
            });
        }
    }
    if !(run.clock.white_pm_sigma_ps >= 0.0) {
        return Err(ConfigError::UnitViolation {
            key: "clock_white_pm_ps".into(),
            msg: "must be >= 0 ps".into(),
        });
    }
    for key in ["link_delay_ab_ps", "link_delay_ba_ps"] {
        if opt_i(&v, key).is_some_and(|d| d < 0) {
            return Err(ConfigError::UnitViolation {
                key: key.into(),
                msg: "must be >= 0 ps".into(),
            });
        }
    }
    Ok(Config {
        scenario,
        run,
        provenance,
    })
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Serializes every key; parsing the result gives back an equal `Config`.
pub fn to_config_string(c: &Config) -> String {
    let s = &c.scenario;
    let r = &c.run;
    let mut rows: Vec<(&str, String)> = vec![
        ("length_km", s.link.length_km.to_string()),
        ("atten_db_per_km", s.link.atten_db_per_km.to_string()),
        ("gvd_ps_nm_km", s.link.gvd_ps_nm_km.to_string()),
        ("rho_fwd_cps_mw_km", s.link.rho_fwd_cps_mw_km.to_string()),
        ("rho_bwd_cps_mw_km", s.link.rho_bwd_cps_mw_km.to_string()),
        ("insertion_loss_db", s.link.insertion_loss_db.to_string()),
        ("power_fwd_mw", s.carrier.power_fwd_mw.to_string()),
        ("power_bwd_mw", s.carrier.power_bwd_mw.to_string()),
        ("carrier_wavelength_nm", s.carrier.wavelength_nm.to_string()),
        ("pair_rate_cps", s.source.pair_rate_cps.to_string()),
        ("arm_eff_local", s.source.arm_eff_local.to_string()),
        ("arm_eff_remote", s.source.arm_eff_remote.to_string()),
        ("source_fwhm_nm", s.source.fwhm_bandwidth_nm.to_string()),
        ("local_efficiency", s.det_local.efficiency.to_string()),
        ("local_dark_cps", s.det_local.dark_rate_cps.to_string()),
        ("local_jitter_sigma_ps", s.det_local.jitter_sigma_ps.to_string()),
        ("local_dead_time_ns", s.det_local.dead_time_ns.to_string()),
        ("remote_efficiency", s.det_remote.efficiency.to_string()),
        ("remote_dark_cps", s.det_remote.dark_rate_cps.to_string()),
        ("remote_jitter_sigma_ps", s.det_remote.jitter_sigma_ps.to_string()),
        ("remote_dead_time_ns", s.det_remote.dead_time_ns.to_string()),
        ("window_ps", s.window_ps.to_string()),
        ("dcm_engaged", s.dcm_engaged.to_string()),
        ("sprs_ref_efficiency", s.sprs_ref_efficiency.to_string()),
        ("duration_s", r.duration_s.to_string()),
        ("interval_s", r.interval_s.to_string()),
        ("clock_offset_ps", r.clock.offset_ps.to_string()),
        ("clock_drift_ps_per_s", r.clock.drift_ps_per_s.to_string()),
        ("clock_white_pm_ps", r.clock.white_pm_sigma_ps.to_string()),
    ];
    if let Some(seed) = r.seed {
        rows.push(("seed", seed.to_string()));
    }
    if let Some(d) = r.link_delay_ab_ps {
        rows.push(("link_delay_ab_ps", d.to_string()));
    }
    if let Some(d) = r.link_delay_ba_ps {
        rows.push(("link_delay_ba_ps", d.to_string()));
    }
    let mut out = String::new();
    for (k, v) in rows {
        match c.provenance.get(k) {
            Some(p) => writeln!(out, "{k} = {v}  # {p}"),
            None => writeln!(out, "{k} = {v}"),
        }
        .expect("write to String");
    }
    out
}

/// A shipped scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

impl Preset {
    pub fn load(&self) -> Result<Config, ConfigError> {
        parse_config(self.text)
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "paper-122km",
        summary: "122 km hollow-core link, DCM engaged, 1 mW each way",
        text: include_str!("../presets/paper-122km.conf"),
    },
    Preset {
        name: "paper-54km-scan",
        summary: "54 km characterization link without DCM",
        text: include_str!("../presets/paper-54km-scan.conf"),
    },
    Preset {
        name: "next-gen",
        summary: "0.08 dB/km fiber with SNSPDs (90%, 50 cps)",
        text: include_str!("../presets/next-gen.conf"),
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn scenario_keys() -> &'static [&'static str] {
    SCENARIO_KEYS
}

pub fn run_keys() -> &'static [&'static str] {
    RUN_KEYS
}
