use std::fmt;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    InvalidInput,
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence in {context}: {detail}")]
    NonConvergence { context: &'static str, detail: String },

    #[error("overflow in linear representation at y = {y}")]
    Overflow { y: f64 },

    #[error("step size underflow at y = {y}")]
    StepUnderflow { y: f64 },

    #[error("eigenvalue audit failed: expected {expected} eigenvalues below {nu_max}, found {found}")]
    MissedEigenvalue {
        expected: usize,
        found: usize,
        nu_max: f64,
    },

    #[error("extrapolation disagreement at nu = {nu}: spread {spread:e} (atom nearby?)")]
    Extrapolation { nu: f64, spread: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_)
            | Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::Precondition(_)
            | Error::Io(_) => ErrorKind::InvalidInput,
            _ => ErrorKind::Numerical,
        }
    }

    pub(crate) fn nonconvergence(context: &'static str, detail: impl fmt::Display) -> Self {
        Error::NonConvergence {
            context,
            detail: detail.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
