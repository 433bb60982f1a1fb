use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation would produce a zero or otherwise meaningless state.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// A sample has zero probability under the current state, usually a sign
    /// that the Fock truncation is too small for the data.
    #[error("numerical support error at sample {index}: probability {value:e}")]
    NumericalSupport { index: usize, value: f64 },

    /// The rejection sampler found a point where the target exceeds the envelope.
    #[error("envelope violation at ({x}, {y}): target {target:e} > envelope {envelope:e}")]
    EnvelopeViolation {
        x: f64,
        y: f64,
        target: f64,
        envelope: f64,
    },

    /// The heralding event has (numerically) zero probability.
    #[error("degenerate heralding: success probability {0:e}")]
    DegenerateHeralding(f64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalSupport { .. }
                | Error::EnvelopeViolation { .. }
                | Error::DegenerateHeralding(_)
                | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
