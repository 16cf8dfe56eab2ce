//! Monte Carlo evaluation of a threshold rule on simulated OU paths.
//!
//! Each path draws from its own ChaCha8 stream selected by the path index,
//! so estimates do not depend on thread count and two rules evaluated with
//! the same seed see the same noise.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::solver::{ThresholdPolicy, Thresholds};
use crate::value::Position;

pub const MIN_PATHS: usize = 100;

/// Time after which discounting leaves less than `1e-6` of the reward.
pub fn default_horizon(rho: f64) -> f64 {
    -(1e-6f64).ln() / rho
}

/// RNG for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Exact transition `z -> b + (z - b) e^{-a dt} + sigma sqrt((1 - e^{-2a dt})/(2a)) eps`.
#[derive(Debug, Clone, Copy)]
pub struct OuStepper {
    b: f64,
    decay: f64,
    sd: f64,
}

impl OuStepper {
    pub fn new(params: &ModelParams, dt: f64) -> Self {
        let decay = (-params.a * dt).exp();
        let var = -(-2.0 * params.a * dt).exp_m1() / (2.0 * params.a);
        Self {
            b: params.b,
            decay,
            sd: params.sigma * var.sqrt(),
        }
    }

    #[inline]
    pub fn step(&self, z: f64, eps: f64) -> f64 {
        self.b + (z - self.b) * self.decay + self.sd * eps
    }
}

pub fn step_exact(z: f64, dt: f64, params: &ModelParams, eps: f64) -> f64 {
    OuStepper::new(params, dt).step(z, eps)
}

/// Path of `n_steps + 1` points starting at `z0`.
pub fn simulate_ou_path(params: &ModelParams, z0: f64, n_steps: usize, dt: f64, seed: u64) -> Vec<f64> {
    let stepper = OuStepper::new(params, dt);
    let mut rng = path_rng(seed, 0);
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut z = z0;
    out.push(z);
    for _ in 0..n_steps {
        z = stepper.step(z, rng.sample(StandardNormal));
        out.push(z);
    }
    out
}

/// Buy/sell levels plus the stop-loss, with costs and discounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradingRule {
    pub thresholds: Thresholds,
    pub params: ModelParams,
}

impl TradingRule {
    pub fn new(params: ModelParams, thresholds: Thresholds) -> Self {
        Self { thresholds, params }
    }

    pub fn from_policy(policy: &ThresholdPolicy) -> Self {
        Self::new(policy.params, policy.thresholds())
    }

    /// Same rule with the levels shifted by `(d0, d1, d2)`.
    pub fn perturbed(&self, d: [f64; 3]) -> Self {
        let t = self.thresholds;
        Self {
            thresholds: Thresholds {
                x0: t.x0 + d[0],
                x1: t.x1 + d[1],
                x2: t.x2 + d[2],
            },
            params: self.params,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Buy,
    Sell,
    StopLossExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    StopLoss,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub reward: f64,
    pub termination: Termination,
    pub end_time: f64,
    pub end_position: Position,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: dt,
                reason: "must be positive",
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                value: horizon,
                reason: "must be positive",
            });
        }
        Ok(Self { dt, horizon })
    }

    /// `dt` with the discounting horizon for `params`.
    pub fn for_params(params: &ModelParams, dt: f64) -> Result<Self> {
        Self::new(dt, default_horizon(params.rho))
    }

    fn steps(&self) -> u64 {
        (self.horizon / self.dt).ceil() as u64
    }
}

/// One path. Actions are checked at each grid time before stepping: at or
/// below `M` a long position is sold and the run ends; flat inside
/// `[x0, x1]` buys; long at or above `x2` sells.
fn run_path<F: FnMut(Event)>(
    rule: &TradingRule,
    stepper: &OuStepper,
    cfg: &SimConfig,
    x: f64,
    pos: Position,
    rng: &mut ChaCha8Rng,
    mut log: F,
) -> (f64, Termination, f64, Position) {
    let p = &rule.params;
    let Thresholds { x0, x1, x2 } = rule.thresholds;
    let n_max = cfg.steps();
    let mut pos = pos;
    let mut z = x;
    let mut reward = 0.0;
    let mut n = 0u64;
    loop {
        let t = n as f64 * cfg.dt;
        if z <= p.m {
            if pos == Position::Long {
                reward += (-p.rho * t).exp() * (z - p.k);
                log(Event {
                    time: t,
                    kind: EventKind::StopLossExit,
                    z,
                });
                pos = Position::Flat;
            }
            return (reward, Termination::StopLoss, t, pos);
        }
        match pos {
            Position::Flat if z >= x0 && z <= x1 => {
                reward -= (-p.rho * t).exp() * (z + p.k);
                pos = Position::Long;
                log(Event {
                    time: t,
                    kind: EventKind::Buy,
                    z,
                });
            }
            Position::Long if z >= x2 => {
                reward += (-p.rho * t).exp() * (z - p.k);
                pos = Position::Flat;
                log(Event {
                    time: t,
                    kind: EventKind::Sell,
                    z,
                });
            }
            _ => {}
        }
        if n >= n_max {
            return (reward, Termination::Horizon, t, pos);
        }
        z = stepper.step(z, rng.sample(StandardNormal));
        n += 1;
    }
}

/// Single path with its event log, using path stream 0 of `seed`.
pub fn run_policy(rule: &TradingRule, x: f64, pos: Position, cfg: &SimConfig, seed: u64) -> PolicyRun {
    let stepper = OuStepper::new(&rule.params, cfg.dt);
    let mut rng = path_rng(seed, 0);
    let mut events = Vec::new();
    let (reward, termination, end_time, end_position) =
        run_path(rule, &stepper, cfg, x, pos, &mut rng, |e| events.push(e));
    PolicyRun {
        reward,
        termination,
        end_time,
        end_position,
        events,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
}

/// Sum with `O(log n)` error growth and a fixed association order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Discounted rewards of `n_paths` paths, in path order.
pub fn path_rewards(
    rule: &TradingRule,
    x: f64,
    pos: Position,
    n_paths: usize,
    cfg: &SimConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_paths < MIN_PATHS {
        return Err(Error::InvalidParameter {
            name: "paths",
            value: n_paths as f64,
            reason: "at least 100 paths are required",
        });
    }
    if !(x >= rule.params.m) || !x.is_finite() {
        return Err(Error::Domain {
            what: "simulation start (below stop-loss)",
            value: x,
        });
    }
    let stepper = OuStepper::new(&rule.params, cfg.dt);
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            run_path(rule, &stepper, cfg, x, pos, &mut rng, |_| {}).0
        })
        .collect())
}

pub fn summarize(rewards: &[f64], cfg: &SimConfig) -> McEstimate {
    let n = rewards.len() as f64;
    let mean = pairwise_sum(rewards) / n;
    let dev: Vec<f64> = rewards.iter().map(|r| (r - mean) * (r - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    McEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n_paths: rewards.len(),
        dt: cfg.dt,
        horizon: cfg.horizon,
    }
}

pub fn mc_value(
    rule: &TradingRule,
    x: f64,
    pos: Position,
    n_paths: usize,
    cfg: &SimConfig,
    seed: u64,
) -> Result<McEstimate> {
    let rewards = path_rewards(rule, x, pos, n_paths, cfg, seed)?;
    Ok(summarize(&rewards, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule() -> TradingRule {
        TradingRule::new(
            ModelParams::default(),
            Thresholds {
                x0: -0.141,
                x1: -0.0756,
                x2: 0.0756,
            },
        )
    }

    #[test]
    fn stepper_matches_closed_form_moments() {
        let p = ModelParams::default();
        let s = OuStepper::new(&p, 0.5);
        assert!((s.step(0.3, 0.0) - 0.3 * (-0.5f64).exp()).abs() < 1e-15);
        let var = p.sigma * p.sigma * (1.0 - (-1.0f64).exp()) / 2.0;
        assert!((s.step(0.0, 1.0) - var.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn start_at_stop_loss_terminates() {
        let cfg = SimConfig::new(1e-3, 10.0).unwrap();
        let r = rule();
        let flat = run_policy(&r, -0.2, Position::Flat, &cfg, 1);
        assert_eq!(flat.reward, 0.0);
        assert!(flat.events.is_empty());
        let long = run_policy(&r, -0.2, Position::Long, &cfg, 1);
        assert!((long.reward - (-0.2 - 0.001)).abs() < 1e-15);
        assert_eq!(long.events[0].kind, EventKind::StopLossExit);
        assert_eq!(long.termination, Termination::StopLoss);
    }

    #[test]
    fn immediate_actions_inside_regions() {
        let cfg = SimConfig::new(1e-3, 1e-3).unwrap();
        let r = rule();
        let run = run_policy(&r, -0.1, Position::Flat, &cfg, 3);
        assert_eq!(run.events[0].kind, EventKind::Buy);
        assert_eq!(run.events[0].time, 0.0);
        let run = run_policy(&r, 0.2, Position::Long, &cfg, 3);
        assert_eq!(run.events[0].kind, EventKind::Sell);
        assert!((run.reward - 0.199).abs() < 1e-15);
    }

    #[test]
    fn events_alternate() {
        let cfg = SimConfig::new(1e-3, 20.0).unwrap();
        let run = run_policy(&rule(), 0.0, Position::Flat, &cfg, 11);
        let mut expect = EventKind::Buy;
        for e in run.events.iter().filter(|e| e.kind != EventKind::StopLossExit) {
            assert_eq!(e.kind, expect);
            expect = if expect == EventKind::Buy { EventKind::Sell } else { EventKind::Buy };
        }
    }

    #[test]
    fn too_few_paths_rejected() {
        let cfg = SimConfig::new(1e-2, 1.0).unwrap();
        assert!(mc_value(&rule(), 0.0, Position::Flat, 99, &cfg, 0).is_err());
        assert!(mc_value(&rule(), -0.3, Position::Flat, 100, &cfg, 0).is_err());
    }

    #[test]
    fn estimate_is_reproducible() {
        let cfg = SimConfig::new(1e-2, 5.0).unwrap();
        let a = mc_value(&rule(), 0.0, Position::Flat, 400, &cfg, 9).unwrap();
        let b = mc_value(&rule(), 0.0, Position::Flat, 400, &cfg, 9).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        let c = mc_value(&rule(), 0.0, Position::Flat, 400, &cfg, 10).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn pairwise_sum_agrees_with_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }
}
