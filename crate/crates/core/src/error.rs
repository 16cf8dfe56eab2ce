use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{what}: argument {value} outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("quadrature did not converge: error estimate {achieved:e} exceeds requested {requested:e} after {evaluations} evaluations")]
    QuadratureNonConvergence {
        achieved: f64,
        requested: f64,
        evaluations: usize,
    },

    #[error("{what} evaluated to a non-finite value at x = {x}")]
    NonFinite { what: &'static str, x: f64 },

    #[error("no buy region: stop-loss {stop_loss} is not below the buy bound {buy_bound}")]
    NoBuyRegion { stop_loss: f64, buy_bound: f64 },

    #[error("no root of {what} found on [{lo}, {hi}]")]
    NoRoot {
        what: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("{what} failed to converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("thresholds x1 = {x1}, x2 = {x2} violate the bounds x1 <= {x1_max}, x2 >= {x2_min}")]
    BoundViolation {
        x1: f64,
        x2: f64,
        x1_max: f64,
        x2_min: f64,
    },

    #[error("price series have no dates in common")]
    MisalignedDates,

    #[error("{what}: need at least {needed} observations, got {got}")]
    InsufficientHistory {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("invalid price series: {0}")]
    InvalidSeries(String),

    #[error("spread is not stationary: AR(1) slope {slope} outside (0, 1)")]
    NonStationary { slope: f64 },

    #[error("spread has zero variance")]
    Degenerate,

    #[error("account wiped out on {date}: equity {equity}")]
    CapitalExhausted { date: String, equity: f64 },

    #[error("spread date {0} has no matching price observation")]
    Alignment(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
