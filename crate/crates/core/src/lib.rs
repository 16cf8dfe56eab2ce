//! Optimal buy/sell thresholds for trading a mean-reverting spread.
//!
//! The spread follows `dZ = a(b - Z)dt + sigma dW`. A trader who is flat
//! buys when `Z` enters `[x0, x1]`, sells when it reaches `x2`, and is
//! forced out at the stop-loss `M`. [`solve_policy`] computes the three
//! levels, the value-function coefficients and a verification report.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod calibration;
pub mod error;
pub mod kernel;
pub mod params;
pub mod quadrature;
pub mod simulation;
pub mod solver;
pub mod sweep;
pub mod value;
pub mod verify;

pub use backtest::{reverse_spread, run_backtest, BacktestConfig, BacktestReport, ExitReason, Trade};
pub use calibration::{build_spread, fit_ou, FitOptions, OuFit, PriceSeries, SpreadSeries, TRADING_DAYS};
pub use error::{Error, Result};
pub use kernel::{BasisEval, OuKernel, StructureVectors};
pub use params::{KernelConfig, ModelParams};
pub use simulation::{mc_value, run_policy, McEstimate, PolicyRun, SimConfig, TradingRule};
pub use solver::{solve_policy, Coefficients, SolverConfig, ThresholdPolicy, ThresholdSolver, Thresholds};
pub use sweep::{sensitivity_sweep, SweepParam, SweepRow};
pub use value::{PiecewiseValue, Position, Side};
pub use verify::{verify_policy, VerificationReport};
