//! C ABI over `ctclm`.
//!
//! Every fallible call returns a [`CtclmStatus`]; on failure the message is
//! available from [`ctclm_last_error`] on the same thread. Objects are
//! opaque handles created by `*_load`/`*_new` functions and released with
//! the matching `*_free`. Strings returned through `char **` out-parameters
//! are owned by the caller and released with [`ctclm_string_free`].

#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ctclm::ctc::{beam_decode, greedy_decode, CtcError, DecodeConfig, PosteriorMatrix};
use ctclm::metrics::{corpus_wer, MetricsError};
use ctclm::ngram::{
    count_ngrams, emit_arpa, estimate, load_model, write_binary, CountOptions, LmError, NGramModel,
    Smoothing,
};
use ctclm::textnorm::{build_vocab, normalize, NormalizedText, TextNormError, Vocabulary};
use ctclm::xlsr::{frame_count, EncoderConfig, XlsrError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtclmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Format = 5,
    Shape = 6,
    NotNormalized = 7,
    Empty = 8,
    Panic = 9,
}

pub const CTCLM_SMOOTHING_MKN: u32 = 0;
pub const CTCLM_SMOOTHING_ADD_K: u32 = 1;

/// Character vocabulary.
pub struct CtclmVocab(Vocabulary);

/// Word n-gram language model.
pub struct CtclmLm(NGramModel);

/// Per-frame natural-log token probabilities.
pub struct CtclmPosteriors(PosteriorMatrix);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtclmDecodeConfig {
    pub beam_width: u32,
    pub lm_weight: f64,
    pub word_bonus: f64,
    /// Tokens below this frame probability are not expanded.
    pub token_floor: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CtclmWer {
    pub substitutions: u64,
    pub deletions: u64,
    pub insertions: u64,
    pub reference_words: u64,
    pub wer: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(CtclmStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(CtclmStatus::NullPointer, format!("{what} is null"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure(CtclmStatus::InvalidArgument, message.into())
    }
}

impl From<LmError> for Failure {
    fn from(e: LmError) -> Self {
        let status = match e {
            LmError::Io(_) => CtclmStatus::Io,
            LmError::Parse { .. } | LmError::CountMismatch { .. } => CtclmStatus::Parse,
            LmError::BadMagic
            | LmError::VersionMismatch { .. }
            | LmError::TruncatedFile
            | LmError::Corrupt(_) => CtclmStatus::Format,
            LmError::EmptyCorpus => CtclmStatus::Empty,
            LmError::BadSmoothing(_) | LmError::BadOrder(_) => CtclmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<CtcError> for Failure {
    fn from(e: CtcError) -> Self {
        let status = match e {
            CtcError::Io(_) => CtclmStatus::Io,
            CtcError::ShapeMismatch { .. } | CtcError::RaggedRows => CtclmStatus::Shape,
            CtcError::EmptyMatrix => CtclmStatus::Empty,
            CtcError::NotNormalized { .. } => CtclmStatus::NotNormalized,
            CtcError::ZeroBeam => CtclmStatus::InvalidArgument,
            CtcError::BadMagic
            | CtcError::VersionMismatch(_)
            | CtcError::Truncated
            | CtcError::TrailingBytes => CtclmStatus::Format,
        };
        Failure(status, e.to_string())
    }
}

impl From<TextNormError> for Failure {
    fn from(e: TextNormError) -> Self {
        let status = match e {
            TextNormError::Io(_) => CtclmStatus::Io,
            TextNormError::EmptyCorpus => CtclmStatus::Empty,
            _ => CtclmStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure(CtclmStatus::Empty, e.to_string())
    }
}

impl From<XlsrError> for Failure {
    fn from(e: XlsrError) -> Self {
        Failure(CtclmStatus::InvalidArgument, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CtclmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            CtclmStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            CtclmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

/// Boxes `value` into a handle only once `out` is known to be writable.
unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("out"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("out"));
    }
    out.write(CString::new(s).map_or(ptr::null_mut(), CString::into_raw));
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ctclm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctclm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ctclm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Normalizes `raw` into lowercase letters and single spaces.
///
/// # Safety
/// `raw` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_normalize(raw: *const c_char, out: *mut *mut c_char) -> CtclmStatus {
    guard(|| {
        let raw = str_arg(raw, "raw")?;
        put_string(out, normalize(raw).into_string())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_vocab_load(
    path: *const c_char,
    out: *mut *mut CtclmVocab,
) -> CtclmStatus {
    guard(|| {
        let vocab = Vocabulary::load(str_arg(path, "path")?)?;
        put_handle(out, CtclmVocab(vocab))
    })
}

/// Builds a vocabulary from newline-separated transcripts.
///
/// # Safety
/// `transcripts` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_vocab_build(
    transcripts: *const c_char,
    out: *mut *mut CtclmVocab,
) -> CtclmStatus {
    guard(|| {
        let text = str_arg(transcripts, "transcripts")?;
        let lines: Vec<NormalizedText> = text.lines().map(normalize).collect();
        let vocab = build_vocab(&lines)?;
        put_handle(out, CtclmVocab(vocab))
    })
}

/// # Safety
/// `vocab` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ctclm_vocab_save(
    vocab: *const CtclmVocab,
    path: *const c_char,
) -> CtclmStatus {
    guard(|| {
        let vocab = handle(vocab, "vocab")?;
        vocab.0.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Number of tokens, or 0 for a null handle.
///
/// # Safety
/// `vocab` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctclm_vocab_len(vocab: *const CtclmVocab) -> usize {
    vocab.as_ref().map_or(0, |v| v.0.len())
}

/// Id of the blank token, or `UINT32_MAX` for a null handle.
///
/// # Safety
/// `vocab` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctclm_vocab_blank_id(vocab: *const CtclmVocab) -> u32 {
    vocab.as_ref().map_or(u32::MAX, |v| v.0.blank_id())
}

/// # Safety
/// `vocab` must be null or a handle that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ctclm_vocab_free(vocab: *mut CtclmVocab) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}

/// Loads an ARPA or binary model; the format is detected from the file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_lm_load(path: *const c_char, out: *mut *mut CtclmLm) -> CtclmStatus {
    guard(|| {
        let model = load_model(str_arg(path, "path")?)?;
        put_handle(out, CtclmLm(model))
    })
}

/// Estimates a model from newline-separated sentences. `smoothing` is
/// `CTCLM_SMOOTHING_MKN` or `CTCLM_SMOOTHING_ADD_K`; `k` is only read for
/// add-k.
///
/// # Safety
/// `corpus` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_lm_train(
    corpus: *const c_char,
    order: u32,
    smoothing: u32,
    k: f64,
    out: *mut *mut CtclmLm,
) -> CtclmStatus {
    guard(|| {
        let text = str_arg(corpus, "corpus")?;
        let smoothing = match smoothing {
            CTCLM_SMOOTHING_MKN => Smoothing::ModifiedKneserNey,
            CTCLM_SMOOTHING_ADD_K => Smoothing::AddK(k),
            other => return Err(Failure::invalid(format!("unknown smoothing {other}"))),
        };
        let sentences: Vec<NormalizedText> = text
            .lines()
            .map(normalize)
            .filter(|s| !s.is_empty())
            .collect();
        let counts = count_ngrams(&sentences, order as usize, CountOptions::default())?;
        let model = estimate(&counts, smoothing)?.model;
        put_handle(out, CtclmLm(model))
    })
}

/// Highest n-gram order, or 0 for a null handle.
///
/// # Safety
/// `lm` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctclm_lm_order(lm: *const CtclmLm) -> u32 {
    lm.as_ref().map_or(0, |m| m.0.order() as u32)
}

/// log10 probability of a sentence, including the end-of-sentence token.
///
/// # Safety
/// `lm` must be a live handle, `sentence` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_lm_score_sentence(
    lm: *const CtclmLm,
    sentence: *const c_char,
    out: *mut f64,
) -> CtclmStatus {
    guard(|| {
        let lm = handle(lm, "lm")?;
        let norm = normalize(str_arg(sentence, "sentence")?);
        let words: Vec<&str> = norm.words().collect();
        put(out, lm.0.score_sentence(&words), "out")
    })
}

/// # Safety
/// `lm` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ctclm_lm_write_arpa(
    lm: *const CtclmLm,
    path: *const c_char,
) -> CtclmStatus {
    guard(|| {
        let lm = handle(lm, "lm")?;
        emit_arpa(&lm.0, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `lm` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ctclm_lm_write_binary(
    lm: *const CtclmLm,
    path: *const c_char,
) -> CtclmStatus {
    guard(|| {
        let lm = handle(lm, "lm")?;
        write_binary(&lm.0, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `lm` must be null or a handle that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ctclm_lm_free(lm: *mut CtclmLm) {
    if !lm.is_null() {
        drop(Box::from_raw(lm));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_posteriors_load(
    path: *const c_char,
    out: *mut *mut CtclmPosteriors,
) -> CtclmStatus {
    guard(|| {
        let m = PosteriorMatrix::load(str_arg(path, "path")?)?;
        put_handle(out, CtclmPosteriors(m))
    })
}

/// Copies `frames * vocab_size` row-major natural-log probabilities.
///
/// # Safety
/// `values` must point to `frames * vocab_size` readable floats; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_posteriors_new(
    values: *const f32,
    frames: usize,
    vocab_size: usize,
    out: *mut *mut CtclmPosteriors,
) -> CtclmStatus {
    guard(|| {
        if values.is_null() {
            return Err(Failure::null("values"));
        }
        let len = frames
            .checked_mul(vocab_size)
            .ok_or_else(|| Failure::invalid("frames * vocab_size overflows"))?;
        let data = std::slice::from_raw_parts(values, len).to_vec();
        let m = PosteriorMatrix::new(frames, vocab_size, data)?;
        put_handle(out, CtclmPosteriors(m))
    })
}

/// # Safety
/// `post` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctclm_posteriors_frames(post: *const CtclmPosteriors) -> usize {
    post.as_ref().map_or(0, |p| p.0.frames())
}

/// # Safety
/// `post` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctclm_posteriors_vocab_size(post: *const CtclmPosteriors) -> usize {
    post.as_ref().map_or(0, |p| p.0.vocab_size())
}

/// # Safety
/// `post` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ctclm_posteriors_save(
    post: *const CtclmPosteriors,
    path: *const c_char,
) -> CtclmStatus {
    guard(|| {
        let post = handle(post, "post")?;
        post.0.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `post` must be null or a handle that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ctclm_posteriors_free(post: *mut CtclmPosteriors) {
    if !post.is_null() {
        drop(Box::from_raw(post));
    }
}

#[no_mangle]
pub extern "C" fn ctclm_decode_config_default() -> CtclmDecodeConfig {
    let d = DecodeConfig::default();
    CtclmDecodeConfig {
        beam_width: d.beam_width as u32,
        lm_weight: d.lm_weight,
        word_bonus: d.word_bonus,
        token_floor: d.prune_log_threshold.exp(),
    }
}

/// Best-path transcription.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_decode_greedy(
    post: *const CtclmPosteriors,
    vocab: *const CtclmVocab,
    out: *mut *mut c_char,
) -> CtclmStatus {
    guard(|| {
        let post = handle(post, "post")?;
        let vocab = handle(vocab, "vocab")?;
        post.0.validate()?;
        let text = greedy_decode(&post.0, &vocab.0)?;
        put_string(out, text.into_string())
    })
}

/// Prefix beam search; `lm` may be null for decoding without fusion and
/// `config` may be null for the defaults.
///
/// # Safety
/// Non-null pointers must be live handles or readable structs; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_decode_beam(
    post: *const CtclmPosteriors,
    vocab: *const CtclmVocab,
    lm: *const CtclmLm,
    config: *const CtclmDecodeConfig,
    out: *mut *mut c_char,
) -> CtclmStatus {
    guard(|| {
        let post = handle(post, "post")?;
        let vocab = handle(vocab, "vocab")?;
        let lm = lm.as_ref().map(|m| &m.0);
        let c = config
            .as_ref()
            .copied()
            .unwrap_or_else(|| ctclm_decode_config_default());
        if !(c.token_floor > 0.0) {
            return Err(Failure::invalid("token_floor must be positive"));
        }
        let cfg = DecodeConfig {
            beam_width: c.beam_width as usize,
            lm_weight: c.lm_weight,
            word_bonus: c.word_bonus,
            prune_log_threshold: c.token_floor.ln(),
        };
        post.0.validate()?;
        let best = beam_decode(&post.0, &vocab.0, &cfg, lm)?
            .into_iter()
            .next()
            .map(|h| h.text.into_string())
            .unwrap_or_default();
        put_string(out, best)
    })
}

/// Pooled word error rate over `n` reference/hypothesis pairs.
///
/// # Safety
/// `refs` and `hyps` must each point to `n` NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_wer(
    refs: *const *const c_char,
    hyps: *const *const c_char,
    n: usize,
    out: *mut CtclmWer,
) -> CtclmStatus {
    guard(|| {
        if refs.is_null() || hyps.is_null() {
            return Err(Failure::null("refs/hyps"));
        }
        let refs = std::slice::from_raw_parts(refs, n);
        let hyps = std::slice::from_raw_parts(hyps, n);
        let mut pairs = Vec::with_capacity(n);
        for i in 0..n {
            pairs.push((
                i.to_string(),
                str_arg(refs[i], "ref")?,
                str_arg(hyps[i], "hyp")?,
            ));
        }
        let report = corpus_wer(pairs.iter().map(|(id, r, h)| (id.as_str(), *r, *h)))?;
        let result = CtclmWer {
            substitutions: report.edits.substitutions as u64,
            deletions: report.edits.deletions as u64,
            insertions: report.edits.insertions as u64,
            reference_words: report.reference_words as u64,
            wer: report.wer,
        };
        put(out, result, "out")
    })
}

/// Encoder output frames for `samples` input samples at 16 kHz.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctclm_frame_count(samples: usize, out: *mut usize) -> CtclmStatus {
    guard(|| {
        let frames = frame_count(samples, &EncoderConfig::default())?;
        put(out, frames, "out")
    })
}
