use thiserror::Error;

use crate::signatures::ImageId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt image stream: {0}")]
    CorruptImage(String),

    #[error("image has zero width or height")]
    ZeroDimension,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid palette: {0}")]
    InvalidPalette(String),

    #[error("feature region contains no pixels inside the image")]
    EmptyRegion,

    #[error("transportation problem needs positive supply and positive demand")]
    EmptyTransport,

    #[error("signature has zero total weight")]
    ZeroWeight,

    #[error("incompatible signatures: {0}")]
    IncompatibleSignatures(String),

    #[error("image {0} is already indexed")]
    DuplicateImage(ImageId),

    #[error("transportation simplex did not converge after {0} pivots")]
    SolverStalled(usize),

    #[error("nothing to index: {0}")]
    EmptyInput(&'static str),

    #[error("unsupported index format version {found} (this build reads version {expected})")]
    Version { found: String, expected: u32 },

    #[error("index file is corrupt: {0}")]
    Corrupt(String),

    #[error("index checksum mismatch: file says {stored}, content hashes to {computed}")]
    Checksum { stored: String, computed: String },

    #[error("index integrity violation: {0}")]
    Integrity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
