use std::io;

use thiserror::Error;

use crate::model::State;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("threshold order violated: need 0 < R < L < N - R, got N={n}, R={r}, L={l}")]
    ThresholdOrderViolation { n: usize, r: usize, l: usize },

    #[error("rate `{name}` must be {requirement}, got {value}")]
    NonPositiveRate {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("constant reduction fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),

    #[error("occupancy {k} outside [0, {capacity}]")]
    OutOfRangeOccupancy { k: i64, capacity: usize },

    #[error("state ({}, {}) is not in the state space", .0.rt, .0.nrt)]
    InvalidState(State),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("chain is reducible: zero pivot while eliminating state index {0}")]
    ReducibleChain(usize),

    #[error("power iteration did not converge after {iterations} iterations (last difference {difference:e})")]
    NotConverged {
        iterations: usize,
        difference: f64,
        last: Vec<f64>,
    },

    #[error("solver residual {residual:e} exceeds acceptance bound {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("zero accepted flow for {0}")]
    ZeroAcceptedFlow(&'static str),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("simulation and analytic report describe different state spaces")]
    ParamMismatch,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing required config key `{0}`")]
    MissingKey(&'static str),

    #[error("{} sweep point(s) rejected: {}", .0.len(), fmt_points(.0))]
    SweepPoints(Vec<(f64, Error)>),

    #[error("nothing to write: result set is empty")]
    EmptyResult,

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn fmt_points(points: &[(f64, Error)]) -> String {
    points
        .iter()
        .map(|(v, e)| format!("[{v}: {e}]"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ThresholdOrderViolation { .. }
            | Error::NonPositiveRate { .. }
            | Error::BadFraction(_)
            | Error::OutOfRangeOccupancy { .. }
            | Error::InvalidState(_)
            | Error::InvalidConfig(_)
            | Error::ParamMismatch
            | Error::Parse { .. }
            | Error::MissingKey(_)
            | Error::SweepPoints(_) => 2,
            Error::DimensionMismatch { .. }
            | Error::ReducibleChain(_)
            | Error::NotConverged { .. }
            | Error::ResidualTooLarge { .. }
            | Error::ZeroAcceptedFlow(_) => 3,
            Error::EmptyResult | Error::Io(_) => 4,
        }
    }
}
