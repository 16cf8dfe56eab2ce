//! Defaults, optional TOML overrides named by `OPTPAIR_CONFIG`, then flags.

use std::path::Path;

use anyhow::Context;
use optpair_core::{KernelConfig, ModelParams};
use serde::{Deserialize, Serialize};

use crate::args::{CommonArgs, Format};
use crate::exit::Usage;

pub const CONFIG_ENV: &str = "OPTPAIR_CONFIG";

pub const DEFAULT_GRID: usize = 2001;
pub const DEFAULT_PATHS: usize = 200_000;
pub const DEFAULT_SIM_DT: f64 = 1e-4;
pub const DEFAULT_WINDOW: usize = 1000;
pub const DEFAULT_CAPITAL: f64 = 100_000.0;
pub const DEFAULT_COMMISSION: f64 = 5.0;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub window: Option<usize>,
    pub capital: Option<f64>,
    pub commission: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| anyhow::Error::new(Usage(format!("config file {}: {e}", path.display()))))
    }

    pub fn from_env() -> anyhow::Result<Self> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }
}

/// Model, kernel and output settings shared by every command.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub params: ModelParams,
    pub kernel: KernelConfig,
    pub grid: usize,
    #[serde(skip)]
    pub format: Option<Format>,
}

pub fn resolve(common: &CommonArgs, file: &FileConfig) -> anyhow::Result<Resolved> {
    let d = ModelParams::default();
    let params = ModelParams {
        a: common.a.or(file.a).unwrap_or(d.a),
        b: common.b.or(file.b).unwrap_or(d.b),
        sigma: common.sigma.or(file.sigma).unwrap_or(d.sigma),
        rho: common.rho.or(file.rho).unwrap_or(d.rho),
        k: common.k.or(file.k).unwrap_or(d.k),
        m: common.m.or(file.m).unwrap_or(d.m),
    };
    params.validate()?;
    let mut kernel = KernelConfig::default();
    if let Some(tol) = common.tol.or(file.tol) {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Usage(format!("--tol must lie in (0, 1), got {tol}")).into());
        }
        kernel.rel_tol = tol;
    }
    let grid = common.grid.or(file.grid).unwrap_or(DEFAULT_GRID);
    if grid < 2 {
        return Err(Usage(format!("--grid must be at least 2, got {grid}")).into());
    }
    Ok(Resolved {
        params,
        kernel,
        grid,
        format: common.format.or(file.format),
    })
}
