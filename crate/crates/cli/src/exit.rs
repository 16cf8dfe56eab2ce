use std::fmt;

use optpair_core::Error;
use serde::Serialize;

pub const OK: i32 = 0;
pub const VALIDATION: i32 = 2;
pub const SOLVER: i32 = 3;
pub const IO: i32 = 4;

/// Bad flag values or configuration.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Serialize)]
pub struct ErrorDoc {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

fn classify_core(e: &Error) -> (&'static str, i32) {
    match e {
        Error::InvalidParameter { .. } => ("invalid-parameter", VALIDATION),
        Error::Domain { .. } => ("domain", VALIDATION),
        Error::InsufficientHistory { .. } => ("insufficient-history", VALIDATION),
        Error::InvalidSeries(_) => ("invalid-series", VALIDATION),
        Error::MisalignedDates => ("misaligned-dates", VALIDATION),
        Error::Alignment(_) => ("alignment", VALIDATION),
        Error::QuadratureNonConvergence { .. } => ("quadrature", SOLVER),
        Error::NonFinite { .. } => ("non-finite", SOLVER),
        Error::NoBuyRegion { .. } => ("no-buy-region", SOLVER),
        Error::NoRoot { .. } => ("no-root", SOLVER),
        Error::NoConvergence { .. } => ("no-convergence", SOLVER),
        Error::BoundViolation { .. } => ("bound-violation", SOLVER),
        Error::NonStationary { .. } => ("non-stationary", SOLVER),
        Error::Degenerate => ("degenerate", SOLVER),
        Error::CapitalExhausted { .. } => ("capital-exhausted", SOLVER),
        Error::Parse { .. } => ("parse", IO),
        Error::Io(_) => ("io", IO),
        Error::Csv(_) => ("csv", IO),
    }
}

pub fn classify(err: &anyhow::Error) -> ErrorDoc {
    let (kind, code) = if let Some(e) = err.downcast_ref::<Error>() {
        classify_core(e)
    } else if err.downcast_ref::<Usage>().is_some() {
        ("usage", VALIDATION)
    } else if err.downcast_ref::<std::io::Error>().is_some() || err.downcast_ref::<serde_json::Error>().is_some() {
        ("io", IO)
    } else {
        ("internal", SOLVER)
    };
    ErrorDoc {
        error: kind,
        message: format!("{err:#}"),
        exit_code: code,
    }
}
