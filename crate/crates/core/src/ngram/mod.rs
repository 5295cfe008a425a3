//! Word n-gram language models: counting, smoothing, ARPA text and a compact
//! binary format, and backoff queries.
//!
//! All probabilities are log10. `<s>` carries the sentinel unigram
//! probability [`LOG10_ZERO`] and is never predicted.

mod arpa;
mod binary;
mod counts;
mod estimate;
mod model;

pub use arpa::{emit_arpa, parse_arpa, read_arpa, write_arpa};
pub use binary::{
    decode as decode_binary, encode as encode_binary, read_binary, write_binary, BINARY_MAGIC,
    BINARY_VERSION,
};
pub use counts::{count_ngrams, CountOptions, NGramCounts};
pub use estimate::{estimate, prune, Estimate, Smoothing};
pub use model::{NGramModel, OrderTable};

use thiserror::Error;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// log10 value standing in for probability zero.
pub const LOG10_ZERO: f32 = -99.0;

pub const MAX_ORDER: usize = 5;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("corpus contains no sentences")]
    EmptyCorpus,
    #[error("invalid smoothing parameter: {0}")]
    BadSmoothing(String),
    #[error("order {0} is outside 1..={MAX_ORDER}")]
    BadOrder(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{order}-gram section has {found} entries but the header declares {declared}")]
    CountMismatch {
        order: usize,
        declared: u64,
        found: u64,
    },
    #[error("not a binary language model (bad magic bytes)")]
    BadMagic,
    #[error("binary model version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("binary model is truncated")]
    TruncatedFile,
    #[error("binary model is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a model in either format, chosen by the leading magic bytes.
pub fn load_model(path: impl AsRef<std::path::Path>) -> Result<NGramModel, LmError> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(&BINARY_MAGIC) {
        binary::decode(&bytes)
    } else {
        read_arpa(bytes.as_slice())
    }
}
