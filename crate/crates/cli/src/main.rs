//! `hollowlink` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 numerical or
//! statistical failure.

mod cli;
mod commands;
mod plot;
mod summary;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use hollowlink_core::coexistence::CoexistenceError;
use hollowlink_core::coincidence::CoincidenceError;
use hollowlink_core::config::{parse_config, to_config_string, Config, ConfigError};
use hollowlink_core::io::FormatError;
use hollowlink_core::sim::SimError;
use hollowlink_core::stability::StabilityError;
use hollowlink_core::twtt::TwttError;
use sha2::{Digest, Sha256};
use thiserror::Error;

use cli::{Cli, Command, ScenarioArgs};

pub const SEED_ENV: &str = "HOLLOWLINK_SEED";

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<CoexistenceError> for Failure {
    fn from(e: CoexistenceError) -> Self {
        match e {
            CoexistenceError::InvalidRange(_) | CoexistenceError::Model(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<CoincidenceError> for Failure {
    fn from(e: CoincidenceError) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<TwttError> for Failure {
    fn from(e: TwttError) -> Self {
        match e {
            TwttError::InvalidSession(_) | TwttError::Sim(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<StabilityError> for Failure {
    fn from(e: StabilityError) -> Self {
        match e {
            StabilityError::InvalidSeries(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

/// Preset or file, then `--set` overrides in order.
pub fn load_scenario(a: &ScenarioArgs) -> Result<Config, Failure> {
    let mut text = match (&a.preset, &a.config) {
        (Some(name), _) => format!("preset = {name}\n"),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        (None, None) => return Err(Failure::Config("either --preset or --config is required".into())),
    };
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        if v.contains('#') || k.trim() == "preset" {
            return Err(Failure::Config(format!("--set cannot carry `{kv}`")));
        }
        text.push_str(&format!("\n{} = {}", k.trim(), v.trim()));
    }
    Ok(parse_config(&text)?)
}

/// Flag, then the config file, then `HOLLOWLINK_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(Failure::Config(format!("{SEED_ENV}: {e}"))),
    }
}

/// SHA-256 of the canonical config text, without provenance comments or seed.
pub fn scenario_hash(c: &Config) -> String {
    let mut c = c.clone();
    c.provenance.clear();
    c.run.seed = None;
    Sha256::digest(to_config_string(&c).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Presets { name } => commands::presets(name.as_deref()),
        Command::CarScan(a) => commands::car_scan(&a),
        Command::MaxDistance(a) => commands::max_distance(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Twtt(a) => commands::twtt(&a),
        Command::Stability(a) => commands::stability(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
