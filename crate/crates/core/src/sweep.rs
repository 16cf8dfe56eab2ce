use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::params::ModelParams;
use crate::solver::{solve_policy, SolverConfig};

/// Model parameter varied by a sensitivity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "sigma")]
    Sigma,
    #[serde(rename = "rho")]
    Rho,
    #[serde(rename = "K")]
    K,
    #[serde(rename = "M")]
    M,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::A => "a",
            SweepParam::B => "b",
            SweepParam::Sigma => "sigma",
            SweepParam::Rho => "rho",
            SweepParam::K => "K",
            SweepParam::M => "M",
        }
    }

    pub fn apply(self, base: &ModelParams, value: f64) -> ModelParams {
        let mut p = *base;
        match self {
            SweepParam::A => p.a = value,
            SweepParam::B => p.b = value,
            SweepParam::Sigma => p.sigma = value,
            SweepParam::Rho => p.rho = value,
            SweepParam::K => p.k = value,
            SweepParam::M => p.m = value,
        }
        p
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" => Ok(SweepParam::A),
            "b" => Ok(SweepParam::B),
            "sigma" => Ok(SweepParam::Sigma),
            "rho" => Ok(SweepParam::Rho),
            "K" | "k" => Ok(SweepParam::K),
            "M" | "m" => Ok(SweepParam::M),
            other => Err(format!("unknown parameter '{other}' (expected a, b, sigma, rho, K or M)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub x0: Option<f64>,
    pub x1: Option<f64>,
    pub x2: Option<f64>,
    pub verified: bool,
    pub error: Option<String>,
}

/// One solved row per value, in input order. Rows that fail keep their slot.
pub fn sensitivity_sweep(
    base: &ModelParams,
    vary: SweepParam,
    values: &[f64],
    config: &SolverConfig,
) -> Vec<SweepRow> {
    values
        .par_iter()
        .map(|&value| {
            let params = vary.apply(base, value);
            match solve_policy(&params, config) {
                Ok(policy) => SweepRow {
                    value,
                    x0: Some(policy.x0),
                    x1: Some(policy.x1),
                    x2: Some(policy.x2),
                    verified: policy.is_verified(),
                    error: None,
                },
                Err(e) => SweepRow {
                    value,
                    x0: None,
                    x1: None,
                    x2: None,
                    verified: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names() {
        assert_eq!("sigma".parse::<SweepParam>().unwrap(), SweepParam::Sigma);
        assert_eq!("M".parse::<SweepParam>().unwrap(), SweepParam::M);
        assert!("theta".parse::<SweepParam>().is_err());
    }

    #[test]
    fn failed_rows_are_kept_in_order() {
        let cfg = SolverConfig {
            grid_n: 51,
            ..SolverConfig::default()
        };
        let rows = sensitivity_sweep(&ModelParams::default(), SweepParam::M, &[-0.2, 0.05, -0.18], &cfg);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].value, -0.2);
        assert!(rows[0].x0.is_some());
        assert!(rows[1].error.is_some() && !rows[1].verified);
        assert_eq!(rows[2].value, -0.18);
    }
}
