//! Error type shared by every solver module.

use thiserror::Error;

/// Failures raised by the solvers, the oracle, and the I/O layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input out of domain: {0}")]
    InputDomain(String),

    /// The pointwise inner minimum is undefined at zero misspecification weight.
    #[error("misspecification index alpha = 0 has no pointwise inner minimum; use the robust limit q = 0")]
    DegenerateIndex,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("empty grid")]
    EmptyGrid,

    /// The reference distribution puts its critical fractile at zero.
    #[error("reference critical fractile is zero; the Wasserstein model needs H^-1(kappa) > 0")]
    ZeroReferenceFractile,

    #[error(
        "stress target {target} is unreachable; the largest reachable target is {max_reachable}"
    )]
    UnreachableTarget { target: f64, max_reachable: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InputDomain(msg.into()))
}
