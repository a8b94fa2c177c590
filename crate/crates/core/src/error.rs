use thiserror::Error;

/// Errors raised by the simulation, tracking and learning routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),

    #[error("angle {0} deg is not finite")]
    NonFiniteAngle(f64),

    #[error("angle {angle} deg outside [{min}, {max}]")]
    AngleOutOfRange { angle: f64, min: f64, max: f64 },

    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("user equipment coincides with the base station at frame {0}")]
    ZeroDistance(usize),

    #[error("weights sum to {0}, expected 1")]
    UnnormalizedWeights(f64),

    #[error("non-finite activation in {layer} at step {step}")]
    NonFiniteActivation { layer: &'static str, step: usize },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("dataset format error: {0}")]
    DatasetFormat(String),

    #[error("track file format error: {0}")]
    TrackFormat(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
