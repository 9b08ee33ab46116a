use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prosumer_core::dist::DistMode;
use prosumer_core::ErrorKind;

mod commands;

#[derive(Parser)]
#[command(
    name = "prosumer",
    version,
    about = "Battery and solar sizing under time-of-use net metering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate an interval meter CSV into a daily dataset and summarize it.
    Ingest(IngestArgs),
    /// Closed-form storage and panel sizes for a daily dataset.
    Size(SizeArgs),
    /// Daily bill simulation for given sizes, with monthly and annual totals.
    Simulate(SimulateArgs),
    /// Total cost over a (b, a) grid, compared with the sequential sizes.
    Sweep(SweepArgs),
    /// Generate a synthetic daily dataset.
    Synth(SynthArgs),
    /// Two-column (x, F(x)) CSV of the peak-load distribution.
    DumpCdf(DumpCdfArgs),
}

#[derive(Args)]
struct Common {
    /// Model config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output format for the stdout summary.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Ecdf,
    Kde,
}

impl From<Mode> for DistMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ecdf => DistMode::Ecdf,
            Mode::Kde => DistMode::Kde,
        }
    }
}

#[derive(Args)]
pub struct IngestArgs {
    #[command(flatten)]
    common: Common,
    /// Interval meter CSV.
    #[arg(long)]
    data: PathBuf,
    /// Daily dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    timestamp_column: Option<String>,
    #[arg(long)]
    load_column: Option<String>,
    #[arg(long)]
    irradiance_column: Option<String>,
}

#[derive(Args)]
pub struct SizeArgs {
    #[command(flatten)]
    common: Common,
    /// Daily dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Kde)]
    mode: Mode,
    /// Storage cap, kWh.
    #[arg(long, default_value_t = 100.0)]
    b_max: f64,
    /// Panel area cap, m².
    #[arg(long, default_value_t = 30.0)]
    a_max: f64,
    /// Also write the (x, F(x)) CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    cdf_points: usize,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: PathBuf,
    /// Storage capacity, kWh.
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    /// Panel area, m².
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    /// Write the report here in `--format`; the text table still goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also report totals under end-of-month netting.
    #[arg(long)]
    netting_diagnostics: bool,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: PathBuf,
    /// Capacity grid `start:stop:step`, kWh.
    #[arg(long, value_parser = parse_grid)]
    grid_b: Option<Grid>,
    /// Area grid `start:stop:step`, m².
    #[arg(long, value_parser = parse_grid)]
    grid_a: Option<Grid>,
    /// Upper end of the default area grid, m².
    #[arg(long, default_value_t = 30.0)]
    a_max: f64,
    /// Distribution used for the sequential capacity.
    #[arg(long, value_enum, default_value_t = Mode::Kde)]
    mode: Mode,
    /// Cost surface CSV (`b,a,cost`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 366)]
    days: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Dataset CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DumpCdfArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Kde)]
    mode: Mode,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    prosumer_core::sizing::parse_grid_spec(s)
        .map(Grid)
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Size(a) => commands::size(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Synth(a) => commands::synth(a),
        Command::DumpCdf(a) => commands::dump_cdf(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Input => ExitCode::from(2),
                ErrorKind::Model => ExitCode::from(3),
            }
        }
    }
}
