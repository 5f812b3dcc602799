use thiserror::Error;

use crate::pfm::PfmError;

pub type Result<T, E = GeoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("map has zero width or height")]
    EmptyMap,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no jointly valid pixels to evaluate")]
    NoValidPixels,

    #[error("scene has no visible surface")]
    NoVisibleSurface,

    #[error(transparent)]
    Pfm(#[from] PfmError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_shape(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(GeoError::ShapeMismatch { expected, found });
    }
    Ok(())
}
