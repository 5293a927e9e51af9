use thiserror::Error;

/// Errors raised by form, field and experiment operations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the operation's domain (bad dimension,
    /// point outside a chart box, degree overflow, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The operand lacks a capability the operation needs, e.g. a C^0
    /// numeric field asked for a derivative.
    #[error("capability error: {0}")]
    Capability(String),

    /// Malformed polynomial or form literal. `position` is a 0-based byte
    /// offset into the input.
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    /// Adaptive quadrature ran out of panels before reaching its target.
    #[error("quadrature budget exhausted: estimate {estimate:?}, error bound {bound:e}")]
    Quadrature { estimate: Vec<f64>, bound: f64 },

    /// Numerical breakdown (singular matrix, step control failure, ...).
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
