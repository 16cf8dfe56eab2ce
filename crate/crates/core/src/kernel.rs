//! Fundamental solutions of `rho f - a(b - x) f' - (sigma^2/2) f'' = 0`.
//!
//! With `eta(t) = t^(rho/a - 1) exp(-t^2/2)` and `kappa = sqrt(2a)/sigma`:
//!
//! ```text
//! phi1(x) = int_0^inf eta(t) exp(-kappa (b - x) t) dt     (increasing)
//! phi2(x) = int_0^inf eta(t) exp( kappa (b - x) t) dt     (decreasing)
//! ```
//!
//! Both reduce to moments `I_m(c) = int_0^inf t^(nu - 1 + m) exp(-t^2/2 + c t) dt`
//! with `nu = rho/a`; each derivative in `x` contributes a factor `+-kappa t`.
//! On `(0, 1]` the substitution `t = u^(1/nu)` absorbs the `t^(nu - 1)`
//! singularity, leaving `(1/nu) t^m exp(-t^2/2 + c t)`. On `[1, T]` the
//! integrand is evaluated in log space and `T` is pushed out until a
//! Gaussian tail bound is negligible against the running estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{KernelConfig, ModelParams};
use crate::quadrature::Integrator;

/// Relative size of the neglected tail beyond the truncation point.
const TAIL_REL: f64 = 1e-14;

/// Basis values and their first two derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisEval {
    pub x: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub dphi1: f64,
    pub dphi2: f64,
    pub d2phi1: f64,
    pub d2phi2: f64,
}

impl BasisEval {
    /// Determinant of the Wronskian matrix `[[phi1, phi2], [phi1', phi2']]`.
    pub fn det(&self) -> f64 {
        self.phi1 * self.dphi2 - self.phi2 * self.dphi1
    }

    /// Solves `Phi(x) v = rhs` by Cramer's rule.
    pub fn solve(&self, rhs: [f64; 2]) -> [f64; 2] {
        let det = self.det();
        [
            (self.dphi2 * rhs[0] - self.phi2 * rhs[1]) / det,
            (self.phi1 * rhs[1] - self.dphi1 * rhs[0]) / det,
        ]
    }

    /// `c1 phi1 + c2 phi2`.
    pub fn combine(&self, c: [f64; 2]) -> f64 {
        c[0] * self.phi1 + c[1] * self.phi2
    }

    pub fn combine_d1(&self, c: [f64; 2]) -> f64 {
        c[0] * self.dphi1 + c[1] * self.dphi2
    }

    pub fn combine_d2(&self, c: [f64; 2]) -> f64 {
        c[0] * self.d2phi1 + c[1] * self.d2phi2
    }
}

/// `R = Phi^-1 (phi2, phi2')`, `P1 = Phi^-1 (x + K, 1)`, `P2 = Phi^-1 (x - K, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureVectors {
    pub r: [f64; 2],
    pub p1: [f64; 2],
    pub p2: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct OuKernel {
    params: ModelParams,
    integrator: Integrator,
    kappa: f64,
    nu: f64,
}

impl OuKernel {
    pub fn new(params: ModelParams) -> Result<Self> {
        Self::with_config(params, KernelConfig::default())
    }

    pub fn with_config(params: ModelParams, config: KernelConfig) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            integrator: Integrator {
                abs_tol: config.abs_tol,
                rel_tol: config.rel_tol,
                max_subdivisions: config.max_subdivisions,
            },
            kappa: params.kappa(),
            nu: params.rho / params.a,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn eta(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain {
                what: "eta",
                value: t,
            });
        }
        Ok(((self.nu - 1.0) * t.ln() - 0.5 * t * t).exp())
    }

    /// `int_0^inf t^(nu - 1 + m) exp(-t^2/2 + c t) dt`.
    pub fn moment(&self, c: f64, m: u32) -> Result<f64> {
        let nu = self.nu;
        let inv_nu = nu.recip();
        let mf = m as f64;
        let ln_inv_nu = inv_nu.ln();

        let head = self.integrator.integrate(
            |u: f64| {
                let t = u.powf(inv_nu);
                if t == 0.0 {
                    return if m == 0 { inv_nu } else { 0.0 };
                }
                (ln_inv_nu + mf * t.ln() - 0.5 * t * t + c * t).exp()
            },
            0.0,
            1.0,
        )?;

        let q = nu - 1.0 + mf;
        let log_f = |t: f64| q * t.ln() - 0.5 * t * t + c * t;
        let tail_integrand = |t: f64| log_f(t).exp();

        let mut hi = 1.0f64.max(c) + 8.0;
        let mut total = head.value + self.integrator.integrate(tail_integrand, 1.0, hi)?.value;
        loop {
            if !total.is_finite() {
                return Err(Error::NonFinite {
                    what: "basis moment",
                    x: c,
                });
            }
            // For t >= hi the log-integrand decays at least at rate `slope`.
            let slope = hi - c - q.max(0.0) / hi;
            if slope > 0.5 && log_f(hi).exp() / slope <= TAIL_REL * total.abs() {
                break;
            }
            let next = hi + 4.0;
            total += self.integrator.integrate(tail_integrand, hi, next)?.value;
            hi = next;
        }
        Ok(total)
    }

    pub fn basis(&self, x: f64) -> Result<BasisEval> {
        if !x.is_finite() {
            return Err(Error::Domain {
                what: "basis",
                value: x,
            });
        }
        let k = self.kappa;
        let c1 = k * (x - self.params.b);
        let c2 = -c1;
        let out = BasisEval {
            x,
            phi1: self.moment(c1, 0)?,
            phi2: self.moment(c2, 0)?,
            dphi1: k * self.moment(c1, 1)?,
            dphi2: -k * self.moment(c2, 1)?,
            d2phi1: k * k * self.moment(c1, 2)?,
            d2phi2: k * k * self.moment(c2, 2)?,
        };
        Ok(out)
    }

    pub fn structure_vectors(&self, x: f64) -> Result<StructureVectors> {
        let be = self.basis(x)?;
        Ok(structure_from_basis(&be, self.params.k))
    }
}

pub fn structure_from_basis(be: &BasisEval, k: f64) -> StructureVectors {
    StructureVectors {
        r: be.solve([be.phi2, be.dphi2]),
        p1: be.solve([be.x + k, 1.0]),
        p2: be.solve([be.x - k, 1.0]),
    }
}

pub fn eta(t: f64, params: &ModelParams) -> Result<f64> {
    OuKernel::new(*params)?.eta(t)
}

pub fn basis_eval(x: f64, params: &ModelParams) -> Result<BasisEval> {
    OuKernel::new(*params)?.basis(x)
}

pub fn structure_vectors(x: f64, params: &ModelParams) -> Result<StructureVectors> {
    OuKernel::new(*params)?.structure_vectors(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    fn ode_residual(p: &ModelParams, f: f64, d1: f64, d2: f64, x: f64) -> f64 {
        p.rho * f - p.a * (p.b - x) * d1 - 0.5 * p.sigma * p.sigma * d2
    }

    #[test]
    fn eta_at_one() {
        let p = ModelParams::default();
        assert!((eta(1.0, &p).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!(eta(0.0, &p).is_err());
        assert!(eta(-1.0, &p).is_err());
    }

    #[test]
    fn eta_integral_matches_gamma() {
        let p = ModelParams::default();
        let nu = p.rho / p.a;
        let exact = 2f64.powf(nu / 2.0 - 1.0) * gamma(nu / 2.0);
        let k = OuKernel::new(p).unwrap();
        let got = k.moment(0.0, 0).unwrap();
        assert!((got - exact).abs() < 1e-9 * exact, "{got} vs {exact}");
        assert!((exact - 10.078).abs() < 1e-3);
    }

    #[test]
    fn symmetric_at_equilibrium() {
        let be = basis_eval(0.0, &ModelParams::default()).unwrap();
        assert_eq!(be.phi1, be.phi2);
        assert_eq!(be.dphi1, -be.dphi2);
    }

    #[test]
    fn monotone_near_equilibrium() {
        let p = ModelParams::default();
        let at_b = basis_eval(p.b, &p).unwrap();
        let right = basis_eval(p.b + 0.1, &p).unwrap();
        assert!(right.phi1 > at_b.phi1);
        assert!(right.phi2 < at_b.phi2);
    }

    #[test]
    fn satisfies_ode_far_from_equilibrium() {
        let p = ModelParams::default();
        let k = OuKernel::new(p).unwrap();
        for x in [-3.0, -1.5, 0.7, 2.5, 5.0] {
            let be = k.basis(x).unwrap();
            let r1 = ode_residual(&p, be.phi1, be.dphi1, be.d2phi1, x);
            let r2 = ode_residual(&p, be.phi2, be.dphi2, be.d2phi2, x);
            assert!(r1.abs() <= 1e-8 * (1.0 + be.phi1.abs()), "x={x} r1={r1}");
            assert!(r2.abs() <= 1e-8 * (1.0 + be.phi2.abs()), "x={x} r2={r2}");
            assert!(be.det() < 0.0);
        }
    }

    #[test]
    fn handles_rho_above_a() {
        let p = ModelParams::new(0.5, 0.0, 0.4, 0.8, 0.001, -0.3).unwrap();
        let nu = p.rho / p.a;
        let exact = 2f64.powf(nu / 2.0 - 1.0) * gamma(nu / 2.0);
        let be = basis_eval(p.b, &p).unwrap();
        assert!((be.phi1 - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn r_is_exactly_unit() {
        let p = ModelParams::default();
        for x in [-0.2, -0.1, 0.0, 0.05, 0.3] {
            let sv = structure_vectors(x, &p).unwrap();
            assert_eq!(sv.r, [0.0, 1.0]);
        }
    }

    #[test]
    fn zero_cost_collapses_p1_p2() {
        let p = ModelParams {
            k: 0.0,
            ..ModelParams::default()
        };
        let sv = structure_vectors(-0.05, &p).unwrap();
        assert_eq!(sv.p1, sv.p2);
    }

    #[test]
    fn p1_minus_p2_is_cost_solve() {
        let p = ModelParams::default();
        let be = basis_eval(0.0, &p).unwrap();
        let sv = structure_from_basis(&be, p.k);
        // Direct 2x2 inverse, written out independently of `solve`.
        let det = be.phi1 * be.dphi2 - be.dphi1 * be.phi2;
        let inv = [
            [be.dphi2 / det, -be.phi2 / det],
            [-be.dphi1 / det, be.phi1 / det],
        ];
        let want = [inv[0][0] * 2.0 * p.k, inv[1][0] * 2.0 * p.k];
        for (i, w) in want.iter().enumerate() {
            let got = sv.p1[i] - sv.p2[i];
            assert!((got - w).abs() <= 1e-12 * w.abs().max(1e-12));
        }
    }

    #[test]
    fn structure_solve_residual() {
        let p = ModelParams::default();
        let be = basis_eval(-0.13, &p).unwrap();
        let sv = structure_from_basis(&be, p.k);
        for (v, rhs) in [(sv.p1, [be.x + p.k, 1.0]), (sv.p2, [be.x - p.k, 1.0])] {
            let r0 = be.phi1 * v[0] + be.phi2 * v[1] - rhs[0];
            let r1 = be.dphi1 * v[0] + be.dphi2 * v[1] - rhs[1];
            let norm = rhs[0].hypot(rhs[1]);
            assert!(r0.hypot(r1) <= 1e-12 * norm);
        }
    }

    #[test]
    fn overflow_is_reported() {
        let p = ModelParams::default();
        let err = basis_eval(200.0, &p);
        assert!(matches!(err, Err(Error::NonFinite { .. })), "{err:?}");
    }
}
