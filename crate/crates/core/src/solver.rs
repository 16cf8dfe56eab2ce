//! Smooth-fit system for the thresholds `(x0, x1, x2)`.
//!
//! With `phi_M = (phi1(M), phi2(M))` and the structure vectors of
//! [`crate::kernel`]:
//!
//! ```text
//! x0:        phi_M . P1(x0) = M - K
//! (x1, x2):  (R(x1) - R(x2)) A2(x2) = P2(x2) - P1(x1)
//! A2(x2)   = (M - K - phi_M . P2(x2)) / (phi_M . R(x2))
//! C        = A2 R(x2) + P2(x2)
//! B        = C - P1(x0)
//! ```
//!
//! `R(x)` is identically `(0, 1)`, so the pair equation reduces to
//! `P1(x1) = P2(x2)`: one homogeneous solution tangent to `x + K` at `x1` and
//! to `x - K` at `x2`. The full form is still evaluated so residuals match the
//! textbook system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{structure_from_basis, BasisEval, OuKernel, StructureVectors};
use crate::params::{KernelConfig, ModelParams};
use crate::value::{PiecewiseValue, Position};
use crate::verify::{verify_parts, VerificationReport};

const X0_BISECT_WIDTH: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 60;
const NEWTON_TARGET: f64 = 1e-13;
/// Accepted residual for the reduced equations.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

impl Coefficients {
    pub fn b(&self) -> [f64; 2] {
        [self.b1, self.b2]
    }

    pub fn c(&self) -> [f64; 2] {
        [self.c1, self.c2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kernel: KernelConfig,
    /// Points per interval for the verification grids.
    pub grid_n: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            grid_n: 2001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMethod {
    Newton,
    NestedBisection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSolution {
    pub x1: f64,
    pub x2: f64,
    pub residual: f64,
    pub method: PairMethod,
    /// Other roots found by the bracket scan, not selected.
    pub alternatives: Vec<[f64; 2]>,
}

/// Solved thresholds, value-function coefficients and their verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub params: ModelParams,
    pub kernel_config: KernelConfig,
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
    pub coefficients: Coefficients,
    pub verification: VerificationReport,
}

impl ThresholdPolicy {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            x0: self.x0,
            x1: self.x1,
            x2: self.x2,
        }
    }

    pub fn is_verified(&self) -> bool {
        self.verification.verified
    }

    pub fn value_function(&self) -> Result<PiecewiseValue> {
        PiecewiseValue::new(self)
    }
}

pub struct ThresholdSolver {
    kernel: OuKernel,
    params: ModelParams,
    config: KernelConfig,
    at_stop: BasisEval,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm_inf(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

impl ThresholdSolver {
    pub fn new(params: ModelParams, config: KernelConfig) -> Result<Self> {
        let kernel = OuKernel::with_config(params, config)?;
        let at_stop = kernel.basis(params.m)?;
        Ok(Self {
            kernel,
            params,
            config,
            at_stop,
        })
    }

    pub fn kernel(&self) -> &OuKernel {
        &self.kernel
    }

    fn stop_row(&self) -> [f64; 2] {
        [self.at_stop.phi1, self.at_stop.phi2]
    }

    fn vectors(&self, x: f64) -> Result<StructureVectors> {
        self.kernel.structure_vectors(x)
    }

    fn require_buy_region(&self) -> Result<f64> {
        let bound = self.params.buy_bound();
        if self.params.m >= bound {
            return Err(Error::NoBuyRegion {
                stop_loss: self.params.m,
                buy_bound: bound,
            });
        }
        Ok(bound)
    }

    /// `phi_M . P1(x) - (M - K)`.
    pub fn x0_residual(&self, x: f64) -> Result<f64> {
        let sv = self.vectors(x)?;
        Ok(dot(self.stop_row(), sv.p1) - (self.params.m - self.params.k))
    }

    /// Residual and its derivative. Differentiating `Phi P1 = (x + K, 1)`
    /// gives `Phi P1' = (0, -(phi1'' P1_1 + phi2'' P1_2))`.
    fn x0_residual_and_slope(&self, x: f64) -> Result<(f64, f64)> {
        let be = self.kernel.basis(x)?;
        let sv = structure_from_basis(&be, self.params.k);
        let g = dot(self.stop_row(), sv.p1) - (self.params.m - self.params.k);
        let dp = be.solve([0.0, -(be.d2phi1 * sv.p1[0] + be.d2phi2 * sv.p1[1])]);
        Ok((g, dot(self.stop_row(), dp)))
    }

    pub fn solve_x0(&self) -> Result<f64> {
        let upper = self.require_buy_region()?;
        let m = self.params.m;
        let span = upper - m;

        // Geometric refinement toward M, plus a uniform sweep.
        let mut fracs: Vec<f64> = (0..=24).map(|j| 10f64.powf(-8.0 + j as f64 / 3.0)).collect();
        fracs.extend((1..=32).map(|j| j as f64 / 32.0));
        fracs.retain(|f| *f > 0.0 && *f <= 1.0);
        fracs.sort_by(f64::total_cmp);
        fracs.dedup();

        let mut prev: Option<(f64, f64)> = None;
        let mut bracket = None;
        for f in fracs {
            let x = if f == 1.0 { upper } else { m + f * span };
            let g = self.x0_residual(x)?;
            if let Some((px, pg)) = prev {
                if pg > 0.0 && g <= 0.0 {
                    bracket = Some((px, x, pg));
                    break;
                }
            }
            prev = Some((x, g));
        }
        let (mut lo, mut hi, _) = bracket.ok_or(Error::NoRoot {
            what: "stop-loss smooth-fit equation for x0",
            lo: m,
            hi: upper,
        })?;

        while hi - lo > X0_BISECT_WIDTH {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.x0_residual(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x0 = 0.5 * (lo + hi);

        // One Newton polish step, kept only if it improves the residual.
        let (g, dg) = self.x0_residual_and_slope(x0)?;
        if dg != 0.0 && dg.is_finite() {
            let cand = x0 - g / dg;
            if (cand - x0).abs() <= 1e-9 && cand > m {
                let gc = self.x0_residual(cand)?;
                if gc.abs() < g.abs() {
                    x0 = cand;
                }
            }
        }

        let resid = self.x0_residual(x0)?;
        if resid.abs() > 1e-10 * (1.0 + (m - self.params.k).abs()) {
            return Err(Error::NoConvergence {
                what: "x0 root polish",
                iterations: 1,
                residual: resid,
            });
        }
        Ok(x0)
    }

    /// `A2` as a function of the sell level.
    pub fn a2_for(&self, sv2: &StructureVectors) -> f64 {
        let row = self.stop_row();
        (self.params.m - self.params.k - dot(row, sv2.p2)) / dot(row, sv2.r)
    }

    /// `(R(x1) - R(x2)) A2(x2) - (P2(x2) - P1(x1))`.
    pub fn pair_residual(&self, x1: f64, x2: f64) -> Result<[f64; 2]> {
        let s1 = self.vectors(x1)?;
        let s2 = self.vectors(x2)?;
        let a2 = self.a2_for(&s2);
        let out: [f64; 2] = std::array::from_fn(|i| (s1.r[i] - s2.r[i]) * a2 - (s2.p2[i] - s1.p1[i]));
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "pair residual",
                x: x2,
            });
        }
        Ok(out)
    }

    fn newton_pair(&self) -> Option<(f64, f64, f64)> {
        let p = &self.params;
        let delta = p.stationary_sd() / 10.0;
        let mut x = [p.buy_bound() - delta, p.sell_bound() + delta];
        let mut f = self.pair_residual(x[0], x[1]).ok()?;

        for _ in 0..NEWTON_MAX_ITER {
            if norm_inf(f) <= NEWTON_TARGET {
                break;
            }
            let mut jac = [[0.0; 2]; 2];
            for j in 0..2 {
                let h = 1e-6 * (1.0 + x[j].abs());
                let mut up = x;
                let mut dn = x;
                up[j] += h;
                dn[j] -= h;
                let fu = self.pair_residual(up[0], up[1]).ok()?;
                let fd = self.pair_residual(dn[0], dn[1]).ok()?;
                for i in 0..2 {
                    jac[i][j] = (fu[i] - fd[i]) / (2.0 * h);
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let step = [
                (-f[0] * jac[1][1] + f[1] * jac[0][1]) / det,
                (-f[1] * jac[0][0] + f[0] * jac[1][0]) / det,
            ];

            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = [x[0] + lambda * step[0], x[1] + lambda * step[1]];
                if cand[0] < cand[1] {
                    if let Ok(fc) = self.pair_residual(cand[0], cand[1]) {
                        if norm_inf(fc) < norm_inf(f) {
                            x = cand;
                            f = fc;
                            accepted = true;
                            break;
                        }
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
            if norm_inf(step) * lambda <= 1e-15 * (1.0 + norm_inf(x)) {
                break;
            }
        }
        let r = norm_inf(f);
        (r <= RESIDUAL_TOL).then_some((x[0], x[1], r))
    }

    /// Given the sell level, the buy level where `h = P2(x2) . phi` touches
    /// `x + K`: the first interior critical point of `h(x) - x` left of `x2`.
    fn tangent_buy_level(&self, x2: f64, lo: f64) -> Result<Option<f64>> {
        let c = self.vectors(x2)?.p2;
        let slope = |x: f64| -> Result<f64> { Ok(self.kernel.basis(x)?.combine_d1(c) - 1.0) };
        let n = 60;
        let span = x2 - lo;
        let mut prev_x = x2 - span / n as f64;
        let mut prev = slope(prev_x)?;
        for j in 2..=n {
            let x = x2 - span * j as f64 / n as f64;
            let s = slope(x)?;
            if (s > 0.0) != (prev > 0.0) {
                let (mut a, mut b) = (x, prev_x);
                let sa = s;
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    if (slope(mid)? > 0.0) == (sa > 0.0) {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                return Ok(Some(0.5 * (a + b)));
            }
            prev_x = x;
            prev = s;
        }
        Ok(None)
    }

    fn tangent_gap(&self, x2: f64, lo: f64) -> Result<Option<(f64, f64)>> {
        let Some(x1) = self.tangent_buy_level(x2, lo)? else {
            return Ok(None);
        };
        let c = self.vectors(x2)?.p2;
        let h = self.kernel.basis(x1)?.combine(c);
        Ok(Some((x1, h - x1 - self.params.k)))
    }

    /// Outer bisection on `x2`, inner root for `x1`; returns every root found.
    pub fn nested_bisection_pairs(&self) -> Result<Vec<(f64, f64)>> {
        let p = &self.params;
        let sd = p.stationary_sd();
        let lo_x2 = p.sell_bound();
        let hi_x2 = p.b + 6.0 * sd;
        let inner_lo = p.m.max(p.b - 6.0 * sd);
        let n = 48;
        let mut roots = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for j in 0..=n {
            let x2 = lo_x2 + (hi_x2 - lo_x2) * j as f64 / n as f64;
            let cur = self.tangent_gap(x2, inner_lo)?.map(|(_, g)| (x2, g));
            if let (Some((pa, ga)), Some((pb, gb))) = (prev, cur) {
                if ga == 0.0 {
                    roots.push(pa);
                } else if (ga > 0.0) != (gb > 0.0) {
                    let (mut a, mut b) = (pa, pb);
                    for _ in 0..100 {
                        let mid = 0.5 * (a + b);
                        if mid <= a || mid >= b {
                            break;
                        }
                        match self.tangent_gap(mid, inner_lo)? {
                            Some((_, gm)) if (gm > 0.0) == (ga > 0.0) => a = mid,
                            Some(_) => b = mid,
                            None => break,
                        }
                    }
                    roots.push(0.5 * (a + b));
                }
            }
            prev = cur;
        }
        let mut out = Vec::new();
        for x2 in roots {
            if let Some(x1) = self.tangent_buy_level(x2, inner_lo)? {
                out.push((x1, x2));
            }
        }
        Ok(out)
    }

    pub fn solve_x1x2(&self) -> Result<PairSolution> {
        let sol = match self.newton_pair() {
            Some((x1, x2, residual)) => PairSolution {
                x1,
                x2,
                residual,
                method: PairMethod::Newton,
                alternatives: Vec::new(),
            },
            None => self.solve_pair_by_bisection()?,
        };
        let (x1_max, x2_min) = (self.params.buy_bound(), self.params.sell_bound());
        if !(sol.x1 < sol.x2) || sol.x1 > x1_max || sol.x2 < x2_min {
            return Err(Error::BoundViolation {
                x1: sol.x1,
                x2: sol.x2,
                x1_max,
                x2_min,
            });
        }
        Ok(sol)
    }

    pub(crate) fn solve_pair_by_bisection(&self) -> Result<PairSolution> {
        let mut found = Vec::new();
        for (x1, x2) in self.nested_bisection_pairs()? {
            let r = norm_inf(self.pair_residual(x1, x2)?);
            if r <= RESIDUAL_TOL {
                found.push((x1, x2, r));
            }
        }
        if found.is_empty() {
            return Err(Error::NoConvergence {
                what: "sell/buy level pair",
                iterations: NEWTON_MAX_ITER,
                residual: f64::NAN,
            });
        }
        let best = if found.len() == 1 {
            0
        } else {
            // Several tangency pairs: keep the one with the largest v0(b).
            let x0 = self.solve_x0()?;
            let mut scores = Vec::with_capacity(found.len());
            for &(x1, x2, _) in &found {
                let coef = self.recover_coefficients(Thresholds { x0, x1, x2 })?;
                let pv = PiecewiseValue::from_parts(
                    self.params,
                    Thresholds { x0, x1, x2 },
                    coef,
                    self.config,
                )?;
                scores.push(pv.eval(Position::Flat, self.params.b.max(self.params.m))?);
            }
            (0..found.len())
                .max_by(|&i, &j| scores[i].total_cmp(&scores[j]))
                .unwrap_or(0)
        };
        let (x1, x2, residual) = found[best];
        let alternatives = found
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .map(|(_, &(a, b, _))| [a, b])
            .collect();
        Ok(PairSolution {
            x1,
            x2,
            residual,
            method: PairMethod::NestedBisection,
            alternatives,
        })
    }

    pub fn recover_coefficients(&self, t: Thresholds) -> Result<Coefficients> {
        let s0 = self.vectors(t.x0)?;
        let s2 = self.vectors(t.x2)?;
        let a2 = self.a2_for(&s2);
        let c = [a2 * s2.r[0] + s2.p2[0], a2 * s2.r[1] + s2.p2[1]];
        let b = [c[0] - s0.p1[0], c[1] - s0.p1[1]];
        Ok(Coefficients {
            a2,
            b1: b[0],
            b2: b[1],
            c1: c[0],
            c2: c[1],
        })
    }

    /// `(phi_M . B, phi_M . C - (M - K))`; both vanish for consistent coefficients.
    pub fn boundary_residuals(&self, coef: &Coefficients) -> [f64; 2] {
        let row = self.stop_row();
        [
            dot(row, coef.b()),
            dot(row, coef.c()) - (self.params.m - self.params.k),
        ]
    }
}

pub fn solve_x0(params: &ModelParams) -> Result<f64> {
    ThresholdSolver::new(*params, KernelConfig::default())?.solve_x0()
}

pub fn solve_x1x2(params: &ModelParams) -> Result<(f64, f64)> {
    let sol = ThresholdSolver::new(*params, KernelConfig::default())?.solve_x1x2()?;
    Ok((sol.x1, sol.x2))
}

pub fn recover_coefficients(x0: f64, x1: f64, x2: f64, params: &ModelParams) -> Result<Coefficients> {
    ThresholdSolver::new(*params, KernelConfig::default())?.recover_coefficients(Thresholds { x0, x1, x2 })
}

/// Solves, recovers coefficients and verifies in one pass.
pub fn solve_policy(params: &ModelParams, config: &SolverConfig) -> Result<ThresholdPolicy> {
    params.validate()?;
    let solver = ThresholdSolver::new(*params, config.kernel)?;
    let x0 = solver.solve_x0()?;
    let pair = solver.solve_x1x2()?;
    let thresholds = Thresholds {
        x0,
        x1: pair.x1,
        x2: pair.x2,
    };
    let coefficients = solver.recover_coefficients(thresholds)?;
    let pv = PiecewiseValue::from_parts(*params, thresholds, coefficients, config.kernel)?;
    let mut verification = verify_parts(&pv, config.grid_n)?;
    verification.pair_method = Some(pair.method);
    verification.alternatives = pair.alternatives;
    Ok(ThresholdPolicy {
        params: *params,
        kernel_config: config.kernel,
        x0,
        x1: pair.x1,
        x2: pair.x2,
        coefficients,
        verification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver() -> ThresholdSolver {
        ThresholdSolver::new(ModelParams::default(), KernelConfig::default()).unwrap()
    }

    #[test]
    fn x0_residual_starts_at_twice_the_cost() {
        // P1(M) reproduces (M + K, 1), so g(M) = 2K.
        let s = solver();
        let p = ModelParams::default();
        assert!((s.x0_residual(p.m).unwrap() - 2.0 * p.k).abs() < 1e-12);
    }

    #[test]
    fn x0_slope_matches_finite_difference() {
        let s = solver();
        let x = -0.15;
        let (_, dg) = s.x0_residual_and_slope(x).unwrap();
        let h = 1e-5;
        let fd = (s.x0_residual(x + h).unwrap() - s.x0_residual(x - h).unwrap()) / (2.0 * h);
        assert!((dg - fd).abs() < 1e-6 * dg.abs().max(1.0), "{dg} vs {fd}");
    }

    #[test]
    fn no_buy_region_is_structured() {
        let p = ModelParams {
            m: 0.01,
            ..ModelParams::default()
        };
        let s = ThresholdSolver::new(p, KernelConfig::default()).unwrap();
        assert!(matches!(s.solve_x0(), Err(Error::NoBuyRegion { .. })));
        assert!(matches!(
            solve_policy(&p, &SolverConfig::default()),
            Err(Error::NoBuyRegion { .. })
        ));
    }

    #[test]
    fn bisection_fallback_agrees_with_newton() {
        let s = solver();
        let newton = s.solve_x1x2().unwrap();
        assert_eq!(newton.method, PairMethod::Newton);
        let bis = s.solve_pair_by_bisection().unwrap();
        assert!((bis.x1 - newton.x1).abs() < 1e-9, "{bis:?} vs {newton:?}");
        assert!((bis.x2 - newton.x2).abs() < 1e-9);
        assert!(bis.alternatives.is_empty());
    }

    #[test]
    fn coefficient_difference_is_p1_at_x0() {
        let s = solver();
        let x0 = s.solve_x0().unwrap();
        let pair = s.solve_x1x2().unwrap();
        let coef = s
            .recover_coefficients(Thresholds {
                x0,
                x1: pair.x1,
                x2: pair.x2,
            })
            .unwrap();
        let p1 = s.vectors(x0).unwrap().p1;
        assert!(((coef.c1 - coef.b1) - p1[0]).abs() < 1e-14 * p1[0].abs().max(1.0));
        assert!(((coef.c2 - coef.b2) - p1[1]).abs() < 1e-14 * p1[1].abs().max(1.0));
        assert_ne!(coef.b(), coef.c());
    }

    #[test]
    fn boundary_identities_hold() {
        let s = solver();
        let x0 = s.solve_x0().unwrap();
        let pair = s.solve_x1x2().unwrap();
        let coef = s
            .recover_coefficients(Thresholds {
                x0,
                x1: pair.x1,
                x2: pair.x2,
            })
            .unwrap();
        let [rb, rc] = s.boundary_residuals(&coef);
        assert!(rb.abs() <= 1e-8 && rc.abs() <= 1e-8, "{rb} {rc}");
    }
}
