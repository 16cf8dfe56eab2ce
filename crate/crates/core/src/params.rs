use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem instance: spread dynamics `dZ = a(b - Z)dt + sigma dW`, discount
/// rate, fixed cost per transaction and the stop-loss floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Reversion rate (1/time).
    pub a: f64,
    /// Equilibrium level.
    pub b: f64,
    pub sigma: f64,
    /// Discount rate (1/time).
    pub rho: f64,
    /// Fixed cost charged on each buy and on each sell.
    #[serde(rename = "K")]
    pub k: f64,
    /// Stop-loss level.
    #[serde(rename = "M")]
    pub m: f64,
}

impl Default for ModelParams {
    /// The WMT/TGT calibration with a stop-loss at -0.2.
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            sigma: 0.56,
            rho: 0.10,
            k: 0.001,
            m: -0.2,
        }
    }
}

impl ModelParams {
    pub fn new(a: f64, b: f64, sigma: f64, rho: f64, k: f64, m: f64) -> Result<Self> {
        let p = Self {
            a,
            b,
            sigma,
            rho,
            k,
            m,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value, reason })
            }
        }
        check("a", self.a, self.a > 0.0, "must be positive")?;
        check("b", self.b, true, "")?;
        check("sigma", self.sigma, self.sigma > 0.0, "must be positive")?;
        check("rho", self.rho, self.rho > 0.0, "must be positive")?;
        check("K", self.k, self.k >= 0.0, "must be non-negative")?;
        check("M", self.m, true, "")?;
        Ok(())
    }

    /// `sqrt(2a)/sigma`, the scale of the basis-function exponent.
    pub fn kappa(&self) -> f64 {
        (2.0 * self.a).sqrt() / self.sigma
    }

    /// Upper bound `(ab - rho K)/(rho + a)` for the top of the buy interval.
    pub fn buy_bound(&self) -> f64 {
        (self.a * self.b - self.rho * self.k) / (self.rho + self.a)
    }

    /// Lower bound `(ab + rho K)/(rho + a)` for the sell level.
    pub fn sell_bound(&self) -> f64 {
        (self.a * self.b + self.rho * self.k) / (self.rho + self.a)
    }

    /// Stationary standard deviation `sigma/sqrt(2a)`.
    pub fn stationary_sd(&self) -> f64 {
        self.sigma / (2.0 * self.a).sqrt()
    }

    /// Upper bound `(rho + a)|M|/rho` on the flat-position value.
    pub fn value_bound(&self) -> f64 {
        (self.rho + self.a) * self.m.abs() / self.rho
    }
}

/// Tolerances for the kernel integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 200,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_rates() {
        assert!(ModelParams::new(-1.0, 0.0, 0.56, 0.1, 0.001, -0.2).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.0, 0.1, 0.001, -0.2).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.56, 0.0, 0.001, -0.2).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.56, 0.1, -0.001, -0.2).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.56, 0.1, 0.001, f64::NAN).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.56, 0.1, 0.0, -0.2).is_ok());
    }

    #[test]
    fn bounds_at_defaults() {
        let p = ModelParams::default();
        assert!((p.buy_bound() + 0.0001 / 1.1).abs() < 1e-15);
        assert!((p.sell_bound() - 0.0001 / 1.1).abs() < 1e-15);
        assert!((p.value_bound() - 2.2).abs() < 1e-12);
    }
}
