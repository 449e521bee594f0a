use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum WltlsError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("{what} refused: K={k} exceeds the brute-force limit {limit}")]
    TooManyClasses {
        what: &'static str,
        k: usize,
        limit: usize,
    },

    #[error("non-finite margin {0}")]
    NonFinite(f64),

    #[error("not a model file (bad magic)")]
    BadMagic,

    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },

    #[error("model file checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

pub type Result<T> = std::result::Result<T, WltlsError>;
