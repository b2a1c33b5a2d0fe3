// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::operator::KernelOperator;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("function evaluation failed at node {index} (x = {x}): got {value}")]
    Sampling { index: usize, x: f64, value: f64 },

    #[error("non-finite kernel value {value} at entry ({i}, {j})")]
    KernelConstruction { i: usize, j: usize, value: f64 },

    #[error("singular division at entry ({i}, {j}): denominator {denominator:e}")]
    SingularDivision { i: usize, j: usize, denominator: f64 },

    #[error("power iteration did not converge in {iterations} iterations (last estimate {last_estimate})")]
    NonConvergence { iterations: usize, last_estimate: f64 },

    /// The successive approximations stopped contracting.
    #[error("successive approximation diverged after {terms} terms (last ratio {})", ratios.last().copied().unwrap_or(f64::NAN))]
    Divergence {
        terms: usize,
        term_norms: Vec<f64>,
        ratios: Vec<f64>,
        partial_sum: Box<KernelOperator>,
    },

    #[error("inverse of I + K is unstable: Neumann and direct solutions differ by {disagreement:e}")]
    InversionInstability { disagreement: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("|t| = {t} exceeds the evolution cap {cap}")]
    TimeCap { t: f64, cap: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("parameter `{name}`: {message}")]
    Parameter { name: String, message: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn param(name: &str, message: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.to_string(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used in failure reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::Sampling { .. } => "sampling",
            Error::KernelConstruction { .. } => "kernel-construction",
            Error::SingularDivision { .. } => "singular-division",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Divergence { .. } => "divergence",
            Error::InversionInstability { .. } => "inversion-instability",
            Error::Precondition(_) => "precondition",
            Error::Overflow(_) => "overflow",
            Error::TimeCap { .. } => "time-cap",
            Error::UnknownPreset(_) => "unknown-preset",
            Error::Parameter { .. } => "parameter",
            Error::Config { .. } => "config",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
