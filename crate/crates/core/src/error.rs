use alloc::string::String;

/// Errors raised by the beam-training library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// `alpha <= 0`: the user sits at `theta = ±1` or at infinite range.
    #[error("closed form undefined for alpha = {alpha}")]
    Domain { alpha: f64 },
    /// No grid sample exceeded the threshold.
    #[error("no sample exceeds threshold {threshold}")]
    EmptySet { threshold: f64 },
    /// Polar codebook truncation removed every distance ring.
    #[error("polar codebook has no finite-distance ring at any angle")]
    EmptyGrid,
    /// Gram matrix of the reconstructed channels is numerically singular.
    #[error("reconstructed channel matrix is singular")]
    SingularChannel,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
