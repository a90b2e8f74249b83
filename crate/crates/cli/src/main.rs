use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod analysis;
mod commands;
mod error;

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "rover", version, about = "Rover breadboard simulation and test-campaign analysis")]
struct Cli {
    /// Worker threads for scenario batches.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate scenario files into telemetry CSVs.
    Simulate(SimulateArgs),
    /// Compute a metric from telemetry.
    Analyze(AnalyzeArgs),
    /// Estimate per-frame wheel deflection from image annotations.
    Deflect(DeflectArgs),
    /// Fit the power model to a cost-of-transport table.
    Calibrate(CalibrateArgs),
    /// Run the bundled presets and write every table and plot series.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario file; repeat for a batch.
    #[arg(long, required = true)]
    pub scenario: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write motion-capture and actuator logs.
    #[arg(long)]
    pub raw: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Cot,
    YawEnergy,
    Efficiency,
    Slip,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub metric: Metric,
    /// Telemetry CSV; repeat to analyse several runs.
    #[arg(long, conflicts_with_all = ["mocap", "actuators"])]
    pub telemetry: Vec<PathBuf>,
    /// Motion-capture CSV, joined with --actuators instead of --telemetry.
    #[arg(long, requires = "actuators")]
    pub mocap: Option<PathBuf>,
    #[arg(long, requires = "mocap")]
    pub actuators: Option<PathBuf>,
    /// Locomotion mode for odometry from raw actuator logs.
    #[arg(long, default_value = "ackermann")]
    pub mode: String,
    /// Largest mocap gap (s) bridged by interpolation.
    #[arg(long, default_value_t = 0.5)]
    pub max_gap: f64,
    /// Scenario or rover config file; one for all runs or one per run.
    #[arg(long)]
    pub config: Vec<PathBuf>,
    /// Differentiation window (s) for efficiency and slip.
    #[arg(long, default_value_t = 0.5)]
    pub window: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DeflectArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub camera: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Rows with this mode label (and zero slope) are fitted; the rest are only reported.
    #[arg(long, default_value = "Nominal")]
    pub fit_label: String,
    /// Fit every row.
    #[arg(long, conflicts_with = "fit_label")]
    pub all: bool,
    /// Power parameters supplying efficiency and steering powers.
    #[arg(long)]
    pub power: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Directory of `.scn` files to use instead of the bundled presets.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs as usize)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Deflect(a) => commands::deflect(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Report(a) => commands::report(a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rover: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
