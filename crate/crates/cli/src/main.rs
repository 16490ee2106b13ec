use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "effcache",
    version,
    about = "Effective-throughput analysis for cache-aided broadcast"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a preset or random instance file.
    Gen(GenArgs),
    /// Sweep the two-user boundary: CSV of every weight, JSON of the vertices.
    Domain(DomainArgs),
    /// Search for a pure equilibrium by alternating best responses.
    Nash(GameArgs),
    /// Cooperative optimum and its equal surplus split.
    Allocate(GameArgs),
    /// Popularity placement with grouped XOR delivery for any number of users.
    Deliver(DeliverArgs),
    /// Brute-force cross-checks on an instance.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Two users, two items, unit buffers.
    Fig1,
    /// 20 items, both users Zipf.
    P1,
    /// 20 items, user 1 uniform, user 2 Zipf.
    P2,
    /// 20 items, both users uniform.
    P3,
    /// Three users on four items.
    P4,
    /// Two users on four items, user 1 interpolated by --beta.
    Beta,
    /// Two users with random preferences.
    Random,
    /// Random users, items and chunk counts.
    RandomMulti,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub preset: Preset,
    /// Buffer size of every user, in items.
    #[arg(long)]
    pub buffer: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 1)]
    pub chunks: usize,
    /// Largest catalog drawn by the random presets.
    #[arg(long, default_value_t = 6)]
    pub items: usize,
    /// Largest user count drawn by random-multi.
    #[arg(long, default_value_t = 4)]
    pub users: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DomainArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Number of evenly spaced weights in [0, 1].
    #[arg(long, default_value_t = 101)]
    pub alphas: usize,
    /// CSV destination; the vertex JSON goes next to it with a .json extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GameArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Mc,
}

#[derive(Debug, Args)]
pub struct DeliverArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One requested item per user (one-based, comma separated); adds that
    /// outcome's schedule to the output.
    #[arg(long, value_delimiter = ',')]
    pub demand: Option<Vec<usize>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Grid resolution for placement search and chunk alignment.
    #[arg(long, default_value_t = 4)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(args) => commands::gen(&args),
        Command::Domain(args) => commands::domain(&args),
        Command::Nash(args) => commands::nash(&args),
        Command::Allocate(args) => commands::allocate(&args),
        Command::Deliver(args) => commands::deliver(&args),
        Command::Oracle(args) => commands::oracle(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
