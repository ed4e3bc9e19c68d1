//! Error type shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A shape/size disagreement between two related structures.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A parameter failed validation (non-finite weight, zero threshold, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Training produced a non-finite weight; the run cannot continue.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// An operation that needs at least one sample got none.
    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    /// A binary file did not start with the expected magic number.
    #[error("bad magic at byte {offset}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        expected: u32,
        found: u32,
        offset: usize,
    },

    /// A binary file ended before its header said it would.
    #[error("truncated file: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },

    /// A label byte outside 0..=9.
    #[error("label out of range at index {index}: {value}")]
    LabelOutOfRange { index: usize, value: u8 },

    /// Image and label files disagree on the number of samples.
    #[error("image/label pairing mismatch: {images} images vs {labels} labels")]
    PairMismatch { images: usize, labels: usize },

    /// A checkpoint written by a newer (or corrupt) version of the format.
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),

    /// A checkpoint of the wrong kind (e.g. plain network where a GAN was expected).
    #[error("wrong checkpoint kind: expected {expected}, found {found}")]
    WrongCheckpointKind { expected: u32, found: u32 },

    /// I/O failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// PNG encoding failure from the image backend.
    #[error("image encoding failed: {0}")]
    ImageEncode(String),
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
