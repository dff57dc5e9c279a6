use thiserror::Error;

use crate::apls::AplsDiagnostics;

/// Errors produced by the fitting, simulation and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("kernel is not positive semidefinite: quadratic form {value:e} below -{threshold:e}")]
    NotPositiveSemidefinite { value: f64, threshold: f64 },

    #[error("kernel is not symmetric: relative asymmetry {0:e}")]
    AsymmetricKernel(f64),

    /// The raw normal-equation system is too close to singular to solve.
    /// Carries the assembled diagnostics so callers can inspect the matrix
    /// that triggered the failure.
    #[error("ill-conditioned system: condition estimate {condition:e} exceeds {limit:e}")]
    IllConditioned {
        condition: f64,
        limit: f64,
        diagnostics: Box<AplsDiagnostics>,
    },

    /// Orthogonalization found a (numerically) linearly dependent column.
    #[error("rank deficiency at column {column}: residual norm {residual:e} below pivot threshold")]
    RankDeficient { column: usize, residual: f64 },

    #[error("requested {requested} components but only {available} are usable")]
    RankExceeded { requested: usize, available: usize },

    #[error("sequence too short: need {needed} terms, have {available}")]
    InsufficientTerms { needed: usize, available: usize },

    #[error("empty test set")]
    EmptyTestSet,

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Csv {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

impl Error {
    /// True for errors caused by malformed input (files, specs, arguments)
    /// rather than by the numerics of a fit.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Csv { .. }
                | Error::Json(_)
                | Error::Io(_)
                | Error::InvalidSpec(_)
                | Error::InvalidInput(_)
                | Error::InvalidGrid(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
