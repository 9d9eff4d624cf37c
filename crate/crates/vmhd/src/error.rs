//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A field handed to a spectral operation contains NaN or infinity.
    #[error("non-finite field in {0}")]
    NonFiniteField(String),

    /// The particle pusher produced a non-finite position or velocity.
    #[error("NaN in particle push at step {step}")]
    NanInPush { step: u64 },

    /// An operation that needs particles was given an empty ensemble.
    #[error("empty ensemble: {0}")]
    EmptyEnsemble(String),

    /// Config text failed to parse; `line` is 1-based.
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    /// A config value parsed but falls outside its allowed range.
    #[error("config value out of range: {key} = {value} ({constraint})")]
    ConfigRange {
        key: String,
        value: String,
        constraint: String,
    },

    /// A decay fit was asked to take the log of a nonpositive sample.
    #[error("nonpositive sample at t = {t} (value = {value}); cannot fit a log-linear model")]
    NonpositiveSample { t: f64, value: f64 },

    /// Too few samples inside the fit window.
    #[error("fit window [{t0}, {t1}] holds {found} samples; need at least {need}")]
    FitWindowTooSmall {
        t0: f64,
        t1: f64,
        found: usize,
        need: usize,
    },

    /// Radial quadrature did not settle under node doubling.
    #[error("quadrature not converged: node doubling changed the result by {change:.3e} (limit {limit:.3e})")]
    QuadratureNotConverged { change: f64, limit: f64 },

    /// Picard iteration blew up instead of contracting.
    #[error("iteration diverged: data not small (delta grew from {previous:.3e} to {current:.3e})")]
    IterationDiverged { previous: f64, current: f64 },

    /// Invalid grid shape or box.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Generic invalid argument with context.
    #[error("{0}")]
    InvalidArgument(String),

    /// CSV content that the reader cannot interpret.
    #[error("csv error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
