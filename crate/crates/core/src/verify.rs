//! Sufficient-condition checks for a solved threshold policy.
//!
//! Failures are recorded as flags with their worst margins; nothing here
//! returns an error for a policy that merely fails a check.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel::BasisEval;
use crate::solver::{PairMethod, ThresholdPolicy};
use crate::value::{linspace, PiecewiseValue, Position, Side};

/// Allowed C1 mismatch across a free boundary.
pub const SMOOTH_FIT_TOL: f64 = 1e-7;
/// Slack absorbing quadrature noise in the value checks.
pub const VALUE_SLACK: f64 = 1e-10;

/// Slack on the `|v1 - v0 - x| <= K` checks.
pub fn obstacle_slack(k: f64) -> f64 {
    k * 1e-6 + VALUE_SLACK
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_interval: usize,
    /// Right end of the `v0 >= 0` scan, `x2 + 5 sigma/sqrt(2a)`.
    pub x_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothFit {
    /// `v0` at `x0`.
    pub x0: f64,
    /// `v0` at `x1`.
    pub x1: f64,
    /// `v1` at `x2`.
    pub x2: f64,
}

impl SmoothFit {
    pub fn max(&self) -> f64 {
        self.x0.max(self.x1).max(self.x2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub ordering_ok: bool,
    pub x1_bound_ok: bool,
    /// `(ab - rho K)/(rho + a) - x1`.
    pub x1_bound_margin: f64,
    pub x2_bound_ok: bool,
    /// `x2 - (ab + rho K)/(rho + a)`.
    pub x2_bound_margin: f64,
    pub obstacle_ok_m_x0: bool,
    /// `K - max |v1 - v0 - x|` over `[M, x0]`.
    pub obstacle_margin_m_x0: f64,
    pub obstacle_ok_x1_x2: bool,
    /// `K - max |v1 - v0 - x|` over `[x1, x2]`.
    pub obstacle_margin_x1_x2: f64,
    pub v0_nonneg_ok: bool,
    pub v0_min: f64,
    pub smoothfit_ok: bool,
    pub smoothfit_residuals: SmoothFit,
    /// `phi_M . B` and `phi_M . C - (M - K)`.
    pub boundary_residuals: [f64; 2],
    pub grid: GridSpec,
    #[serde(default)]
    pub pair_method: Option<PairMethod>,
    #[serde(default)]
    pub alternatives: Vec<[f64; 2]>,
    pub verified: bool,
}

fn mismatch(pv: &PiecewiseValue, be: &BasisEval, pos: Position) -> f64 {
    let l = pv.derivs_from_basis(be, pos, Side::Left);
    let r = pv.derivs_from_basis(be, pos, Side::Right);
    (l.v - r.v).abs().max((l.dv - r.dv).abs())
}

/// Worst `|v1 - v0 - x|` over the grid.
fn worst_gap(pv: &PiecewiseValue, xs: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in xs {
        let (v0, v1) = pv.eval_both(x)?;
        worst = worst.max((v1 - v0 - x).abs());
    }
    Ok(worst)
}

pub fn verify_parts(pv: &PiecewiseValue, grid_n: usize) -> Result<VerificationReport> {
    let p = *pv.params();
    let t = pv.thresholds;
    let kernel = pv.kernel();
    let grid_n = grid_n.max(2);

    let ordering_ok = p.m < t.x0 && t.x0 <= t.x1 && t.x1 < t.x2;
    let x1_bound_margin = p.buy_bound() - t.x1;
    let x2_bound_margin = t.x2 - p.sell_bound();

    let slack = obstacle_slack(p.k);
    let (m_x0, x1_x2) = if ordering_ok {
        (
            worst_gap(pv, &linspace(p.m, t.x0, grid_n))?,
            worst_gap(pv, &linspace(t.x1, t.x2, grid_n))?,
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let obstacle_margin_m_x0 = p.k - m_x0;
    let obstacle_margin_x1_x2 = p.k - x1_x2;

    let x_max = t.x2 + 5.0 * p.stationary_sd();
    let mut v0_min = f64::INFINITY;
    let mut edges = vec![p.m];
    for e in [t.x0, t.x1, t.x2] {
        if e > *edges.last().unwrap() && e < x_max {
            edges.push(e);
        }
    }
    edges.push(x_max);
    for w in edges.windows(2) {
        for x in linspace(w[0], w[1], grid_n) {
            v0_min = v0_min.min(pv.eval(Position::Flat, x)?);
        }
    }

    let smoothfit_residuals = SmoothFit {
        x0: mismatch(pv, &kernel.basis(t.x0)?, Position::Flat),
        x1: mismatch(pv, &kernel.basis(t.x1)?, Position::Flat),
        x2: mismatch(pv, &kernel.basis(t.x2)?, Position::Long),
    };

    let at_stop = kernel.basis(p.m)?;
    let boundary_residuals = [
        at_stop.combine(pv.coefficients.b()),
        at_stop.combine(pv.coefficients.c()) - (p.m - p.k),
    ];

    let mut report = VerificationReport {
        ordering_ok,
        x1_bound_ok: x1_bound_margin >= 0.0,
        x1_bound_margin,
        x2_bound_ok: x2_bound_margin >= 0.0,
        x2_bound_margin,
        obstacle_ok_m_x0: obstacle_margin_m_x0 >= -slack,
        obstacle_margin_m_x0,
        obstacle_ok_x1_x2: obstacle_margin_x1_x2 >= -slack,
        obstacle_margin_x1_x2,
        v0_nonneg_ok: v0_min >= -VALUE_SLACK,
        v0_min,
        smoothfit_ok: smoothfit_residuals.max() <= SMOOTH_FIT_TOL,
        smoothfit_residuals,
        boundary_residuals,
        grid: GridSpec {
            points_per_interval: grid_n,
            x_max,
        },
        pair_method: None,
        alternatives: Vec::new(),
        verified: false,
    };
    report.verified = report.all_ok();
    Ok(report)
}

impl VerificationReport {
    pub fn all_ok(&self) -> bool {
        self.ordering_ok
            && self.x1_bound_ok
            && self.x2_bound_ok
            && self.obstacle_ok_m_x0
            && self.obstacle_ok_x1_x2
            && self.v0_nonneg_ok
            && self.smoothfit_ok
            && self.boundary_residuals.iter().all(|r| r.abs() <= 1e-8)
    }
}

/// Re-runs every check on `policy` with `grid_n` points per interval.
pub fn verify_policy(policy: &ThresholdPolicy, grid_n: usize) -> Result<VerificationReport> {
    let pv = PiecewiseValue::new(policy)?;
    let mut report = verify_parts(&pv, grid_n)?;
    report.pair_method = policy.verification.pair_method;
    report.alternatives = policy.verification.alternatives.clone();
    Ok(report)
}
