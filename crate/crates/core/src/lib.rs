//! Character-level CTC decoding toolkit with word n-gram shallow fusion.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod ctc;
pub mod metrics;
pub mod ngram;
pub mod synth;
pub mod textnorm;
pub mod xlsr;
