use std::fmt;

use thiserror::Error;

/// A single field-level configuration problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("{} invalid parameter(s):\n  {}", .0.len(), join(.0))]
    Invalid(Vec<Violation>),

    #[error("rotor {rotor} has negative squared speed {value}")]
    NegativeRotorCommand { rotor: usize, value: f64 },

    #[error("state is not finite")]
    NonFiniteState,

    #[error("requested thrust {0} N is negative")]
    InfeasibleThrust(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("model must be {expected}")]
    WrongModelKind { expected: &'static str },

    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,

    #[error("numerical divergence at t = {t:.4} s: {reason}")]
    NumericalDivergence { t: f64, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n  ")
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn from_violations(v: Vec<Violation>) -> Result<(), Error> {
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
