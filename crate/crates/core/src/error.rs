use std::fmt;

use thiserror::Error;

/// A single violated configuration constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("statically unstable: total spring Omega_M^2 + K/M = {omega_sq:.6e} rad^2/s^2 is negative")]
    StaticallyUnstable { omega_sq: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last iterate {last:.9e} rad/s, relative residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        residual: f64,
    },

    #[error("unstable plant: net damping {net_damping:.6e} rad/s, envelope growth rate {growth_rate:.6e} 1/s")]
    UnstablePlant { net_damping: f64, growth_rate: f64 },

    #[error("time step {dt:.3e} s too coarse; need dt <= {max_dt:.3e} s")]
    StepTooCoarse { dt: f64, max_dt: f64 },

    #[error("aliasing: {what} at {frequency_hz} Hz exceeds Nyquist {nyquist_hz} Hz")]
    Aliasing {
        what: &'static str,
        frequency_hz: f64,
        nyquist_hz: f64,
    },

    #[error("series too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("calibration line at {frequency_hz} Hz not found (prominence {prominence:.3} < {required})")]
    LineNotFound {
        frequency_hz: f64,
        prominence: f64,
        required: f64,
    },

    #[error("band [{lo}, {hi}] Hz outside grid [{grid_lo}, {grid_hi}] Hz or empty")]
    BandOutOfRange {
        lo: f64,
        hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },

    #[error("fit did not converge after {iterations} iterations")]
    FitNonConvergence { iterations: usize },

    #[error("fit unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("non-positive band power {0:.3e}")]
    NonPositiveBandPower(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
