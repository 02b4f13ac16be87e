use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod analyze;
mod simulate;

#[derive(Parser)]
#[command(
    name = "ifloo",
    version,
    about = "Standardized ATE estimation for binary outcomes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    JsonLines,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the ATE of a trial stored as CSV.
    Analyze(AnalyzeArgs),
    /// Run a simulation scenario and write the per-method summary CSV.
    Simulate(SimulateArgs),
}

#[derive(clap::Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Outcome column (0/1).
    #[arg(long)]
    pub outcome: String,
    /// Treatment column (0/1).
    #[arg(long)]
    pub treatment: String,
    /// Covariate columns entered as main terms.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Known randomization probability P(A = 1).
    #[arg(long)]
    pub pi0: f64,
    #[arg(long, value_delimiter = ',', default_value = "if-loo")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 1000)]
    pub boot: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Add treatment-by-covariate interaction terms to the working model.
    #[arg(long)]
    pub interactions: bool,
    /// Treat separation in the full-data working model as an estimation error.
    #[arg(long)]
    pub fail_on_separation: bool,
}

#[derive(clap::Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Override the scenario's replicate count.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Override the scenario's bootstrap resample count (0 disables the bootstrap).
    #[arg(long)]
    pub boot: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Summary CSV path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional per-replicate audit CSV.
    #[arg(long)]
    pub replicates_out: Option<PathBuf>,
    /// Full scale: 10,000 replicates and 1,000 bootstrap resamples.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Monte Carlo draws for the true-ATE cross-check (0 skips it).
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_draws: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => analyze::run(&args),
        Command::Simulate(args) => simulate::run(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            match e
                .chain()
                .find_map(|c| c.downcast_ref::<ifloo_core::Error>())
            {
                Some(core) => eprintln!("error[{}]: {e:#}", core.kind()),
                None => eprintln!("error[usage]: {e:#}"),
            }
            ExitCode::from(2)
        }
    }
}
