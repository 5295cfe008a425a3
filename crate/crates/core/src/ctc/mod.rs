//! Greedy and prefix-beam CTC decoding, with optional word-level n-gram
//! shallow fusion.

mod beam;
mod posterior;

pub use beam::{beam_decode, prefix_beam_search, BeamHypothesis, Fusion, RankedHypothesis};
pub use posterior::{PosteriorMatrix, CTCL_MAGIC, CTCL_VERSION, ROW_TOLERANCE};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ngram::NGramModel;
use crate::textnorm::{NormalizedText, Vocabulary};

#[derive(Debug, Error)]
pub enum CtcError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("posterior matrix has no frames or no tokens")]
    EmptyMatrix,
    #[error("posterior rows have different lengths")]
    RaggedRows,
    #[error("row {row} is not a distribution (exp-sum {sum})")]
    NotNormalized { row: usize, sum: f64 },
    #[error("beam width must be at least 1")]
    ZeroBeam,
    #[error("not a CTCL file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported CTCL version {0}")]
    VersionMismatch(u32),
    #[error("CTCL file is truncated")]
    Truncated,
    #[error("CTCL file has trailing bytes")]
    TrailingBytes,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// Weight on the natural-log LM probability.
    pub lm_weight: f64,
    /// Added per completed word.
    pub word_bonus: f64,
    /// Tokens with frame log-probability below this are not expanded.
    pub prune_log_threshold: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_width: 100,
            lm_weight: 0.5,
            word_bonus: 1.0,
            prune_log_threshold: (1e-4f64).ln(),
        }
    }
}

fn check_vocab(post: &PosteriorMatrix, vocab: &Vocabulary) -> Result<(), CtcError> {
    if post.vocab_size() != vocab.len() {
        return Err(CtcError::ShapeMismatch {
            expected: vocab.len(),
            found: post.vocab_size(),
        });
    }
    Ok(())
}

/// Per-frame argmax token ids; ties go to the lowest id.
pub fn best_path(post: &PosteriorMatrix) -> Vec<u32> {
    (0..post.frames())
        .map(|t| {
            let row = post.row(t);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best as u32
        })
        .collect()
}

/// Merges repeated ids, then drops blanks.
pub fn collapse(path: &[u32], blank: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(path.len());
    let mut prev = None;
    for &id in path {
        if Some(id) != prev && id != blank {
            out.push(id);
        }
        prev = Some(id);
    }
    out
}

pub fn greedy_decode(
    post: &PosteriorMatrix,
    vocab: &Vocabulary,
) -> Result<NormalizedText, CtcError> {
    check_vocab(post, vocab)?;
    let ids = collapse(&best_path(post), vocab.blank_id());
    Ok(vocab.decode(&ids))
}

#[derive(Debug, Clone, Copy)]
pub enum Decoder<'a> {
    Greedy,
    Beam {
        cfg: DecodeConfig,
        lm: Option<&'a NGramModel>,
    },
}

impl Decoder<'_> {
    pub fn decode(
        &self,
        post: &PosteriorMatrix,
        vocab: &Vocabulary,
    ) -> Result<NormalizedText, CtcError> {
        post.validate()?;
        match *self {
            Decoder::Greedy => greedy_decode(post, vocab),
            Decoder::Beam { cfg, lm } => Ok(beam_decode(post, vocab, &cfg, lm)?
                .into_iter()
                .next()
                .map(|h| h.text)
                .unwrap_or_default()),
        }
    }
}

/// Decodes utterances independently (in parallel) and returns results in
/// input order. Errors stay attached to their utterance.
pub fn batch_decode<'a, I>(
    posteriors: I,
    vocab: &Vocabulary,
    decoder: Decoder<'_>,
) -> Vec<(String, Result<NormalizedText, CtcError>)>
where
    I: IntoParallelIterator<Item = (String, &'a PosteriorMatrix)>,
{
    posteriors
        .into_par_iter()
        .map(|(id, post)| {
            let res = decoder.decode(post, vocab);
            (id, res)
        })
        .collect()
}
