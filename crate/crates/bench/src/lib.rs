//! Benchmarks live in `benches/`; this crate has no library code of its own.

use optpair_core::{solve_policy, ModelParams, SolverConfig, ThresholdPolicy};

/// The default policy, solved once for benches that need thresholds.
pub fn default_policy() -> ThresholdPolicy {
    solve_policy(&ModelParams::default(), &SolverConfig::default()).expect("default parameters solve")
}
