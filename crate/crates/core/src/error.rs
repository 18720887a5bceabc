use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("transform is not in the image of the exponential map: {0}")]
    NotInImage(String),
    #[error("matrix logarithm leaves the generator span (residual {0:.3e})")]
    ProjectionResidual(f64),
    #[error("singular transform (|det| = {0:.3e})")]
    Singular(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate appearance Jacobian (trace {0:.3e})")]
    DegenerateJacobian(f64),
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("image norm is zero")]
    ZeroImage,
    #[error("no successful samples")]
    NoSamples,
    #[error("target distance {target} unreachable (max {reached:.4} at s = {s_max})")]
    Unreachable { target: f64, reached: f64, s_max: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }

    /// Stable machine-readable tag used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "non_finite",
            Error::NotInImage(_) => "not_in_image",
            Error::ProjectionResidual(_) => "projection_residual",
            Error::Singular(_) => "singular",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DegenerateJacobian(_) => "degenerate_jacobian",
            Error::EmptyClass(_) => "empty_class",
            Error::Diverged { .. } => "diverged",
            Error::ZeroImage => "zero_image",
            Error::NoSamples => "no_samples",
            Error::Unreachable { .. } => "unreachable",
            Error::Precondition(_) => "precondition",
            Error::Config(_) => "config",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
