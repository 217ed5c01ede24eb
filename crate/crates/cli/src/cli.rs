use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hollowlink", version, about = "Coexistence scans, photon-level simulation and two-way time transfer over hollow-core fiber")]
pub struct Cli {
    /// Worker threads for scans and interval processing (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the shipped presets, or print one.
    Presets {
        /// Preset to print in full.
        name: Option<String>,
    },
    /// CAR over a power scan, a length scan or a length x power grid (CSV).
    CarScan(CarScanArgs),
    /// Longest link that still meets a CAR threshold (CSV).
    MaxDistance(MaxDistanceArgs),
    /// Simulate the four detector streams and compare them with the model.
    Simulate(SimulateArgs),
    /// Run a two-way time transfer session and write the offset series (CSV).
    Twtt(TwttArgs),
    /// TDEV, MDEV or ADEV of an offset series or of synthetic noise (CSV).
    Stability(StabilityArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Shipped preset to start from.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    /// Scenario file (see docs/config.md).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CarScanArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Forward carrier power in mW: a value or `min:max:n`.
    #[arg(long, value_name = "SPEC")]
    pub power: Option<String>,
    /// Fiber length in km: a value or `min:max:n`.
    #[arg(long, value_name = "SPEC")]
    pub length: Option<String>,
    /// Output CSV (default: stdout).
    #[arg(long, short, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script for the CSV.
    #[arg(long, value_name = "PATH", requires = "out")]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaxDistanceArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// CAR that counts as operational.
    #[arg(long, conflicts_with = "calibrate_km", required_unless_present = "calibrate_km")]
    pub threshold: Option<f64>,
    /// Pick the threshold so the reach at --calibrate-power is this many km.
    #[arg(long, value_name = "KM")]
    pub calibrate_km: Option<f64>,
    /// Power (mW) the calibration refers to (default: the scenario power).
    #[arg(long, value_name = "MW", requires = "calibrate_km")]
    pub calibrate_power: Option<f64>,
    /// Comma-separated forward powers in mW (default: the scenario power).
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub power: Vec<f64>,
    /// Search limit in km.
    #[arg(long, default_value_t = 1000.0)]
    pub l_max: f64,
    /// Repeat for each modeling toggle (carrier direction, coefficient
    /// rescaling).
    #[arg(long)]
    pub toggles: bool,
    #[arg(long, short, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TagFormat {
    Binary,
    Csv,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Simulated duration in s (default: from the config).
    #[arg(long)]
    pub duration: Option<f64>,
    /// RNG seed (default: config file, then HOLLOWLINK_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Half width of the first delay search, ps.
    #[arg(long, default_value_t = 1_000_000_000)]
    pub search_ps: i64,
    /// Leave the creation time out of the outputs.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Directory for the streams, histograms and summary.json.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = TagFormat::Binary)]
    pub format: TagFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Measure {
    Tdev,
    Mdev,
    Adev,
}

#[derive(Debug, Args)]
pub struct StabilityOutput {
    #[arg(long, value_enum, default_value_t = Measure::Tdev)]
    pub measure: Measure,
    /// Comma-separated averaging times in s (default: octaves).
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,
    /// Print the log-log slope of the curve.
    #[arg(long)]
    pub fit_slope: bool,
    /// Restrict the slope fit to `lo:hi` seconds.
    #[arg(long, value_name = "LO:HI", requires = "fit_slope")]
    pub fit_range: Option<String>,
    /// Write a gnuplot script plotting the stability CSV.
    #[arg(long, value_name = "PATH")]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TwttArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Measurement interval in s (default: from the config).
    #[arg(long)]
    pub interval: Option<f64>,
    /// Offset series CSV (default: stdout).
    #[arg(long, short, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Also write the stability curve of the series here.
    #[arg(long, value_name = "PATH")]
    pub stability_out: Option<PathBuf>,
    #[command(flatten)]
    pub stability: StabilityOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Synthetic {
    WhitePm,
    WhiteFm,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// Offset series CSV (`epoch_s,offset_ps,stderr_ps`).
    #[arg(long, value_name = "PATH", conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,
    /// Analyze synthetic noise instead of a file.
    #[arg(long, value_enum)]
    pub synthetic: Option<Synthetic>,
    /// Noise level: sigma_x in s for white PM, sigma_y for white FM.
    #[arg(long, requires = "synthetic")]
    pub level: Option<f64>,
    /// Sample spacing of the synthetic series, s.
    #[arg(long, default_value_t = 1.0)]
    pub tau0: f64,
    /// Length of the synthetic series.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Seed of the synthetic series (default: HOLLOWLINK_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stability CSV (default: stdout).
    #[arg(long, short, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub stability: StabilityOutput,
}
