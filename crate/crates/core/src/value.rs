//! Piecewise value functions of the threshold policy.
//!
//! ```text
//! v0(x) = B.phi(x)                 on [M, x0)
//!       = C.phi(x) - x - K         on [x0, x1)
//!       = A2 phi2(x)               on [x1, inf)
//! v1(x) = C.phi(x)                 on [M, x2)
//!       = A2 phi2(x) + x - K       on [x2, inf)
//! ```
//!
//! Pieces are closed on the left; at an interior boundary `Side::Left`
//! selects the piece ending there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{BasisEval, OuKernel};
use crate::params::{KernelConfig, ModelParams};
use crate::solver::{Coefficients, ThresholdPolicy, Thresholds};

/// Net position: flat (0) or long one unit of the spread (1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Position {
    Flat,
    Long,
}

impl Position {
    pub fn index(self) -> usize {
        match self {
            Position::Flat => 0,
            Position::Long => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Position::Flat),
            1 => Some(Position::Long),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Position::Flat => Position::Long,
            Position::Long => Position::Flat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Side {
    Left,
    #[default]
    Right,
}

/// Value and first two derivatives of one position's value function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueDerivs {
    pub v: f64,
    pub dv: f64,
    pub d2v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbResidual {
    /// `rho v - a(b - x) v' - (sigma^2/2) v''`.
    pub pde: f64,
    /// Switching branch: `v0 - v1 + x + K` when flat, `v1 - v0 - x + K` when long.
    pub obstacle: f64,
}

impl HjbResidual {
    pub fn min(&self) -> f64 {
        self.pde.min(self.obstacle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuePoint {
    pub x: f64,
    pub v0: f64,
    pub v1: f64,
}

#[derive(Debug, Clone)]
pub struct PiecewiseValue {
    kernel: OuKernel,
    params: ModelParams,
    pub thresholds: Thresholds,
    pub coefficients: Coefficients,
}

impl PiecewiseValue {
    pub fn new(policy: &ThresholdPolicy) -> Result<Self> {
        Self::from_parts(
            policy.params,
            policy.thresholds(),
            policy.coefficients,
            policy.kernel_config,
        )
    }

    pub fn from_parts(
        params: ModelParams,
        thresholds: Thresholds,
        coefficients: Coefficients,
        config: KernelConfig,
    ) -> Result<Self> {
        Ok(Self {
            kernel: OuKernel::with_config(params, config)?,
            params,
            thresholds,
            coefficients,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn kernel(&self) -> &OuKernel {
        &self.kernel
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if !(x >= self.params.m) || !x.is_finite() {
            return Err(Error::Domain {
                what: "value function (x below stop-loss)",
                value: x,
            });
        }
        Ok(())
    }

    /// Evaluates one position's piece at `x` from a precomputed basis.
    pub fn derivs_from_basis(&self, be: &BasisEval, pos: Position, side: Side) -> ValueDerivs {
        let x = be.x;
        let Thresholds { x0, x1, x2 } = self.thresholds;
        let coef = &self.coefficients;
        let (a2, b, c) = (coef.a2, coef.b(), coef.c());
        let k = self.params.k;
        let left_of = |edge: f64| match side {
            Side::Left => x <= edge,
            Side::Right => x < edge,
        };
        let homogeneous = |coef: [f64; 2]| ValueDerivs {
            v: be.combine(coef),
            dv: be.combine_d1(coef),
            d2v: be.combine_d2(coef),
        };
        match pos {
            Position::Flat => {
                if left_of(x0) {
                    homogeneous(b)
                } else if left_of(x1) {
                    let h = homogeneous(c);
                    ValueDerivs {
                        v: h.v - x - k,
                        dv: h.dv - 1.0,
                        d2v: h.d2v,
                    }
                } else {
                    homogeneous([0.0, a2])
                }
            }
            Position::Long => {
                if left_of(x2) {
                    homogeneous(c)
                } else {
                    let h = homogeneous([0.0, a2]);
                    ValueDerivs {
                        v: h.v + x - k,
                        dv: h.dv + 1.0,
                        d2v: h.d2v,
                    }
                }
            }
        }
    }

    pub fn eval_derivs(&self, pos: Position, x: f64, side: Side) -> Result<ValueDerivs> {
        self.check_domain(x)?;
        let be = self.kernel.basis(x)?;
        Ok(self.derivs_from_basis(&be, pos, side))
    }

    pub fn eval(&self, pos: Position, x: f64) -> Result<f64> {
        Ok(self.eval_derivs(pos, x, Side::Right)?.v)
    }

    /// `(v0(x), v1(x))` from a single basis evaluation.
    pub fn eval_both(&self, x: f64) -> Result<(f64, f64)> {
        self.check_domain(x)?;
        let be = self.kernel.basis(x)?;
        Ok((
            self.derivs_from_basis(&be, Position::Flat, Side::Right).v,
            self.derivs_from_basis(&be, Position::Long, Side::Right).v,
        ))
    }

    fn is_boundary(&self, pos: Position, x: f64) -> bool {
        let t = self.thresholds;
        match pos {
            Position::Flat => x == t.x0 || x == t.x1,
            Position::Long => x == t.x2,
        }
    }

    /// Both branches of the quasi-variational inequality at `x > M`:
    ///
    /// flat: `min{rho v0 - A v0, v0 - v1 + x + K}`,
    /// long: `min{rho v1 - A v1, v1 - v0 - x + K}`.
    ///
    /// At a piece boundary of `v_i` a side must be given.
    pub fn hjb_residual(&self, pos: Position, x: f64, side: Option<Side>) -> Result<HjbResidual> {
        if !(x > self.params.m) || !x.is_finite() {
            return Err(Error::Domain {
                what: "HJB residual (x must exceed stop-loss)",
                value: x,
            });
        }
        let side = match side {
            Some(s) => s,
            None if self.is_boundary(pos, x) => {
                return Err(Error::Domain {
                    what: "HJB residual at a piece boundary without a side",
                    value: x,
                })
            }
            None => Side::Right,
        };
        let be = self.kernel.basis(x)?;
        let own = self.derivs_from_basis(&be, pos, side);
        let other = self.derivs_from_basis(&be, pos.other(), side);
        let p = &self.params;
        let pde = p.rho * own.v - p.a * (p.b - x) * own.dv - 0.5 * p.sigma * p.sigma * own.d2v;
        let obstacle = match pos {
            Position::Flat => own.v - other.v + x + p.k,
            Position::Long => own.v - other.v - x + p.k,
        };
        Ok(HjbResidual { pde, obstacle })
    }

    pub fn curve(&self, xs: &[f64]) -> Result<Vec<ValuePoint>> {
        xs.iter()
            .map(|&x| {
                let (v0, v1) = self.eval_both(x)?;
                Ok(ValuePoint { x, v0, v1 })
            })
            .collect()
    }
}

pub fn eval_v(pos: Position, x: f64, pv: &PiecewiseValue) -> Result<f64> {
    pv.eval(pos, x)
}

pub fn hjb_residual(pos: Position, x: f64, pv: &PiecewiseValue, side: Option<Side>) -> Result<HjbResidual> {
    pv.hjb_residual(pos, x, side)
}

/// Evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}
