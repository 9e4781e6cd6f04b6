use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod analytic;
mod solve;
mod sweep;
mod validate;

/// Closed-form RIS design for multi-operator systems.
#[derive(Parser)]
#[command(name = "risopt", version, about)]
struct Cli {
    /// Random seed; 0 when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and report the optimal received power.
    Solve(SolveArgs),
    /// Run a Monte Carlo sweep described by a config file.
    Sweep(SweepArgs),
    /// Evaluate the expected-power formulas and scaling coefficients.
    Analytic(AnalyticArgs),
    /// Run a self-validation suite.
    Validate(ValidateArgs),
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["channels", "random"])))]
pub struct SolveArgs {
    /// Channel file (header "N L", tagged rows h_RI, h_IT1.., d_2..).
    #[arg(long)]
    channels: Option<PathBuf>,
    /// Draw Rayleigh channels with the default geometry.
    #[arg(long)]
    random: bool,
    /// RIS size (with --random).
    #[arg(long = "N")]
    n: Option<usize>,
    /// Number of groups.
    #[arg(long = "G")]
    groups: usize,
    /// Number of operators (with --random).
    #[arg(long = "L", default_value_t = 2)]
    operators: usize,
    /// Direct BS-user channel as `re+imj` (two operators, Gs >= 2).
    #[arg(long, allow_hyphen_values = true)]
    direct_path: Option<String>,
    /// Transmit power in watts.
    #[arg(long, default_value_t = 10.0)]
    tx_power: f64,
    /// Write the scattering matrix to this file.
    #[arg(long)]
    theta_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV output; overrides [output] csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG chart; overrides [output] svg.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Case {
    I,
    Ii,
    Iii,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyticChannelArg {
    Rayleigh,
    Los,
}

#[derive(Args)]
pub struct AnalyticArgs {
    /// 1: Rayleigh two-operator, 2: LoS two-operator, 3: Rayleigh L-operator.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    theorem: Option<u8>,
    /// i: fully connected, ii: group connected, iii: single connected (or Gs < L).
    #[arg(long, value_enum)]
    case: Option<Case>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Group size, or `full`.
    #[arg(long = "Gs")]
    group_size: Option<String>,
    #[arg(long = "L", default_value_t = 2)]
    operators: usize,
    #[arg(long, default_value_t = 1.0)]
    rho_ri: f64,
    #[arg(long, default_value_t = 1.0)]
    rho_it1: f64,
    /// Spatial-frequency difference for the LoS formula.
    #[arg(long, allow_hyphen_values = true)]
    delta_mu: Option<f64>,
    /// Print the large-N coefficient kappa instead.
    #[arg(long)]
    kappa: bool,
    /// Print the large-N ratio to a single-operator RIS instead.
    #[arg(long)]
    ratio: bool,
    #[arg(long, value_enum, default_value = "rayleigh")]
    channel: AnalyticChannelArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Oracle,
    Stats,
    Scaling,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Monte Carlo trials per cell (stats) or feasible samples per case (oracle).
    #[arg(long)]
    trials: Option<usize>,
}

/// Failure classes mapped to exit codes.
pub enum Failure {
    /// Exit 1.
    Validation(String),
    /// Exit 2.
    Usage(String),
}

impl From<risopt_core::RisError> for Failure {
    fn from(e: risopt_core::RisError) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Worker count from `RIS_THREADS`, if set.
pub fn env_workers() -> Result<Option<usize>, Failure> {
    match std::env::var("RIS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(Some(w)),
            _ => Err(Failure::Usage(format!(
                "RIS_THREADS must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or(0);
    let result = match &cli.command {
        Command::Solve(a) => solve::run(a, seed),
        Command::Sweep(a) => sweep::run(a, cli.seed),
        Command::Analytic(a) => analytic::run(a),
        Command::Validate(a) => validate::run(a, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
