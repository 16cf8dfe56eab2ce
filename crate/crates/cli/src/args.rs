use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Optimal buy/sell thresholds for trading a mean-reverting spread.
#[derive(Debug, Parser)]
#[command(name = "optpair", version, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionArg {
    Flat,
    Long,
}

#[derive(Debug, Default, Args)]
#[command(next_help_heading = "Model and output")]
pub struct CommonArgs {
    /// Mean-reversion speed.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Equilibrium level.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Volatility.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    /// Discount rate.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Transaction cost per trade, in spread units.
    #[arg(long = "K", global = true, allow_hyphen_values = true)]
    pub k: Option<f64>,
    /// Stop-loss level.
    #[arg(long = "M", global = true, allow_hyphen_values = true)]
    pub m: Option<f64>,
    /// Relative tolerance of the kernel integrals.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    /// Points per interval for the verification grids.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the main output here instead of stdout (a directory for `backtest`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for (x0, x1, x2) and verify the policy.
    Thresholds(ThresholdsArgs),
    /// Re-solve while one parameter takes a list of values.
    Sweep(SweepArgs),
    /// Build a spread from two price files, or read one, and fit OU parameters.
    Calibrate(CalibrateArgs),
    /// Monte Carlo value of the optimal rule, or a simulated spread series with --steps.
    Simulate(SimulateArgs),
    /// Run the rule over historical prices.
    Backtest(BacktestArgs),
}

#[derive(Debug, Args)]
pub struct ThresholdsArgs {
    /// Also emit (x, v0, v1) at this many evenly spaced points on [M, x2 + 5 sd].
    #[arg(long)]
    pub curve: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// One of a, b, sigma, rho, K, M.
    #[arg(long)]
    pub vary: String,
    /// Comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,
}

#[derive(Debug, Args)]
pub struct SpreadSource {
    /// Price file of leg 1 (`date,close`).
    #[arg(long, requires = "leg2")]
    pub leg1: Option<PathBuf>,
    /// Price file of leg 2 (`date,close`).
    #[arg(long, requires = "leg1")]
    pub leg2: Option<PathBuf>,
    /// Precomputed spread file (`date,z`).
    #[arg(long)]
    pub spread: Option<PathBuf>,
    /// Moving-average window used to normalise each leg.
    #[arg(long)]
    pub window: Option<usize>,
    /// Time step between observations, in years.
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub source: SpreadSource,
    /// Minimum number of observations.
    #[arg(long)]
    pub min_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub horizon: Option<f64>,
    /// Starting spread level.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    #[arg(long, value_enum)]
    pub position: Option<PositionArg>,
    /// Emit one simulated path of this many steps instead of a valuation.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub source: SpreadSource,
    /// Starting capital [default: 100000].
    #[arg(long, allow_hyphen_values = true)]
    pub capital: Option<f64>,
    /// Commission per transaction; a round trip pays it twice [default: 5].
    #[arg(long, allow_hyphen_values = true)]
    pub commission: Option<f64>,
    /// Trade the negated spread: buy leg 2 and short leg 1.
    #[arg(long)]
    pub reverse: bool,
    /// Stop trading after the first stop-loss exit.
    #[arg(long)]
    pub no_reentry: bool,
    /// Size every entry from the initial capital.
    #[arg(long)]
    pub no_reinvest: bool,
    /// Lower buy level; with --x1 and --x2 the levels are used instead of solved.
    #[arg(long, allow_hyphen_values = true, requires_all = ["x1", "x2"])]
    pub x0: Option<f64>,
    /// Upper buy level; needs --x0 and --x2.
    #[arg(long, allow_hyphen_values = true, requires_all = ["x0", "x2"])]
    pub x1: Option<f64>,
    /// Sell level; needs --x0 and --x1.
    #[arg(long, allow_hyphen_values = true, requires_all = ["x0", "x1"])]
    pub x2: Option<f64>,
}
