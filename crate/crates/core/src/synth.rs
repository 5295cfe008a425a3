//! Synthetic benchmark data: sentences from a small Indonesian-like grammar
//! and posterior matrices built from their character paths with seeded
//! confusions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctc::PosteriorMatrix;
use crate::textnorm::{build_vocab, normalize, NormalizedText, Vocabulary};

const SUBJECTS: &[&str] = &[
    "saya", "kami", "mereka", "dia", "ibu", "ayah", "adik", "kakak", "guru", "teman",
];
const PLACES: &[&str] = &["pasar", "sekolah", "kantor", "rumah", "pantai", "kota"];
const FOODS: &[&str] = &["nasi", "roti", "sate", "ikan", "buah"];
const ITEMS: &[&str] = &["buku", "baju", "sepatu", "tas", "sayur"];
const READING: &[&str] = &["buku", "koran", "surat", "majalah"];
const DRINKS: &[&str] = &["teh", "kopi", "susu", "air"];
const TIMES: &[&str] = &[
    "pagi ini",
    "hari ini",
    "besok pagi",
    "nanti malam",
    "kemarin sore",
];

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("word lists are non-empty")
}

/// One sentence from the grammar.
pub fn sentence<R: Rng + ?Sized>(rng: &mut R) -> NormalizedText {
    let subject = pick(rng, SUBJECTS);
    let mut s = match rng.gen_range(0..5) {
        0 => format!("{subject} pergi ke {}", pick(rng, PLACES)),
        1 => format!(
            "{subject} makan {} di {}",
            pick(rng, FOODS),
            pick(rng, PLACES)
        ),
        2 => format!(
            "{subject} membeli {} di {}",
            pick(rng, ITEMS),
            pick(rng, PLACES)
        ),
        3 => format!("{subject} membaca {}", pick(rng, READING)),
        _ => format!("{subject} minum {}", pick(rng, DRINKS)),
    };
    if rng.gen_bool(0.5) {
        s.push(' ');
        s.push_str(pick(rng, TIMES));
    }
    normalize(&s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub lm_sentences: usize,
    pub test_sentences: usize,
    /// Probability that a character frame is confused.
    pub confusion_rate: f64,
    /// Share of confusions whose competitor is the blank.
    pub blank_confusion: f64,
    /// Mass on the true token in a confused frame; the competitor gets the
    /// rest.
    pub true_mass: f64,
    /// Probability of every other token in any frame.
    pub floor: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            lm_sentences: 200,
            test_sentences: 100,
            confusion_rate: 0.06,
            blank_confusion: 0.25,
            true_mass: 0.12,
            floor: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub lm_corpus: Vec<NormalizedText>,
    /// `(id, reference)` pairs.
    pub test: Vec<(String, NormalizedText)>,
    pub vocab: Vocabulary,
    pub posteriors: Vec<PosteriorMatrix>,
}

/// Rows for the character path of `text`: each character frame is
/// followed by a blank frame.
pub fn noisy_posteriors<R: Rng + ?Sized>(
    text: &NormalizedText,
    vocab: &Vocabulary,
    cfg: &SynthConfig,
    rng: &mut R,
) -> PosteriorMatrix {
    let v = vocab.len();
    let blank = vocab.blank_id() as usize;
    let unk = vocab.unk_id() as usize;
    let labels: Vec<usize> = (0..v).filter(|&i| i != blank && i != unk).collect();
    let ids = vocab.encode(text);
    let mut rows = Vec::with_capacity(ids.len() * 2);
    let clean = |target: usize| -> Vec<f64> {
        let mut row = vec![cfg.floor; v];
        row[target] = 1.0 - cfg.floor * (v - 1) as f64;
        row
    };
    for id in ids {
        let id = id as usize;
        if rng.gen_bool(cfg.confusion_rate) {
            let competitor = if rng.gen_bool(cfg.blank_confusion) {
                blank
            } else {
                let others: Vec<usize> = labels.iter().copied().filter(|&l| l != id).collect();
                *others
                    .choose(rng)
                    .expect("vocabulary has at least two labels")
            };
            let rest = 1.0 - cfg.floor * (v - 2) as f64;
            let mut row = vec![cfg.floor; v];
            row[id] = cfg.true_mass * rest;
            row[competitor] = (1.0 - cfg.true_mass) * rest;
            rows.push(row);
        } else {
            rows.push(clean(id));
        }
        rows.push(clean(blank));
    }
    PosteriorMatrix::from_probs(&rows).expect("rows share the vocabulary width")
}

/// Draws the LM corpus, the test sentences and their posteriors from
/// independent streams of one seed.
pub fn generate(cfg: &SynthConfig, seed: u64) -> SyntheticSet {
    let mut corpus_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_rng = ChaCha8Rng::seed_from_u64(seed);
    test_rng.set_stream(1);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(2);

    let lm_corpus: Vec<NormalizedText> = (0..cfg.lm_sentences)
        .map(|_| sentence(&mut corpus_rng))
        .collect();
    let test: Vec<(String, NormalizedText)> = (0..cfg.test_sentences)
        .map(|i| (format!("synth-{i:04}"), sentence(&mut test_rng)))
        .collect();
    let vocab = build_vocab(lm_corpus.iter().chain(test.iter().map(|(_, t)| t)))
        .expect("grammar sentences are non-empty");
    let posteriors = test
        .iter()
        .map(|(_, t)| noisy_posteriors(t, &vocab, cfg, &mut noise_rng))
        .collect();
    SyntheticSet {
        lm_corpus,
        test,
        vocab,
        posteriors,
    }
}
