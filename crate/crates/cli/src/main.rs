//! `scour`: declarative experiment runner.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scour_core::Error;

#[derive(Parser)]
#[command(name = "scour", version, about = "Scour forecasting experiments")]
struct Cli {
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a long-format sensor CSV into an hourly frame.
    Preprocess(PreprocessArgs),
    /// Generate a synthetic scour frame.
    Synth(SynthArgs),
    /// Train one model with a hold-out split.
    Train(RunArgs),
    /// Rank a search space with grid or random search.
    Tune(RunArgs),
    /// Train one model fold by fold.
    Sequential(RunArgs),
    /// Train one model on several feature sets.
    FeatureSweep(RunArgs),
    /// Export checkpoint forecasts with an ensemble band.
    Forecast(ForecastArgs),
    /// Verify backward passes of model graphs at toy sizes.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
pub struct PreprocessArgs {
    /// Long-format CSV with `timestamp,channel,value` rows.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving `frame.csv` and `report.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 24)]
    pub despike_window: usize,
    #[arg(long, default_value_t = 6.0)]
    pub k_mad: f64,
    #[arg(long, default_value_t = 3)]
    pub max_gap: usize,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Kind {
    Seasonal,
    Tidal,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Directory receiving `frame.csv`, `sensor.csv` and `scenario.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Seasonal)]
    pub kind: Kind,
    #[arg(long, default_value_t = 1.0)]
    pub years: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 3)]
    pub floods: usize,
    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct RunArgs {
    /// Experiment file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ForecastArgs {
    /// Checkpoint files; several form an ensemble.
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<PathBuf>,
    /// Wide frame CSV.
    #[arg(long)]
    pub frame: PathBuf,
    /// First timestamp of the exported range (default: frame start).
    #[arg(long)]
    pub start: Option<String>,
    /// Timestamp after the exported range (default: frame end).
    #[arg(long)]
    pub end: Option<String>,
    /// Destination CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GradcheckArgs {
    /// Model configurations; defaults to one toy graph per family.
    pub configs: Vec<String>,
    /// Window for convolutional configurations.
    #[arg(long, default_value_t = 8)]
    pub w_in: usize,
    #[arg(long, default_value_t = 3)]
    pub w_out: usize,
    #[arg(long, default_value_t = 2)]
    pub n_in: usize,
    #[arg(long, default_value_t = 2)]
    pub n_out: usize,
    #[arg(long, default_value_t = 3)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure together with its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DivergedLoss { .. } | Error::NonFiniteGradient(_) => Failure::numeric(e.to_string()),
            _ => Failure::usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Preprocess(a) => commands::preprocess(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a, false),
        Command::Sequential(a) => commands::train(&a, true),
        Command::Tune(a) => commands::tune(&a),
        Command::FeatureSweep(a) => commands::feature_sweep(&a),
        Command::Forecast(a) => commands::forecast(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
