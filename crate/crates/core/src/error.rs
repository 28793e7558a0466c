use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid input parameters or configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value lies outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("radial functions live on different grids")]
    GridMismatch,

    /// The ray through the state never crosses the Nehari set.
    #[error("state cannot be scaled onto the Nehari manifold")]
    NoProjection,

    #[error("state is not on the Nehari manifold (relative |F| = {0:e})")]
    NotOnManifold(f64),

    #[error("descent did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("branch unavailable: {0}")]
    BranchUnavailable(String),

    /// The z-coordinates are not reproduced by the four-parameter family.
    #[error("z-vector is not consistent with a solution (reconstruction error {0:e})")]
    InconsistentZ(f64),

    #[error("one component collapsed (component L2 fraction {0:e})")]
    SemitrivialCollapse(f64),

    #[error("energy ordering violated: J(second) = {second}, J(first) = {first}")]
    OrderingViolation { first: f64, second: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Configuration-type failures map to CLI exit code 2, everything else to 1.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
