use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::LN_10;

use super::{check_vocab, CtcError, DecodeConfig, PosteriorMatrix};
use crate::ngram::NGramModel;
use crate::textnorm::{NormalizedText, Vocabulary};

/// Word-level language model hooked into the beam. A word completes when
/// the delimiter token is emitted after at least one character, and once
/// more at the end of the utterance for a trailing partial word.
#[derive(Debug, Clone, Copy)]
pub struct Fusion<'a> {
    pub lm: &'a NGramModel,
    pub vocab: &'a Vocabulary,
}

impl Fusion<'_> {
    fn word_id(&self, tokens: &[u32]) -> u32 {
        let word: String = tokens
            .iter()
            .filter_map(|&id| self.vocab.token(id))
            .collect();
        self.lm.word_id(&word)
    }
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// One prefix in the beam: CTC mass split by whether the last frame was a
/// blank, plus the fusion state of the words the prefix has completed.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    /// Token ids with blanks removed and repeats collapsed.
    pub prefix: Vec<u32>,
    pub p_blank: f64,
    pub p_nonblank: f64,
    /// LM ids of completed words, oldest first.
    pub lm_state: Vec<u32>,
    pub lm_score_log10: f64,
    word_start: usize,
}

impl BeamHypothesis {
    fn root() -> Self {
        Self {
            prefix: Vec::new(),
            p_blank: 0.0,
            p_nonblank: f64::NEG_INFINITY,
            lm_state: Vec::new(),
            lm_score_log10: 0.0,
            word_start: 0,
        }
    }

    /// Natural-log CTC probability of the prefix.
    pub fn acoustic(&self) -> f64 {
        logaddexp(self.p_blank, self.p_nonblank)
    }

    pub fn words(&self) -> usize {
        self.lm_state.len()
    }

    /// `alpha * ln P_LM + beta * words`; zero without fusion.
    pub fn fusion_score(&self, cfg: &DecodeConfig) -> f64 {
        cfg.lm_weight * self.lm_score_log10 * LN_10 + cfg.word_bonus * self.words() as f64
    }

    pub fn score(&self, cfg: &DecodeConfig) -> f64 {
        self.acoustic() + self.fusion_score(cfg)
    }

    fn complete_word(&mut self, fusion: &Fusion<'_>, end: usize) {
        let tokens = &self.prefix[self.word_start..end];
        if !tokens.is_empty() {
            let id = fusion.word_id(tokens);
            self.score_lm(fusion.lm, id);
            self.lm_state.push(id);
        }
        self.word_start = end;
    }

    fn score_lm(&mut self, lm: &NGramModel, id: u32) {
        // The model truncates the history itself; `<s>` falls away once
        // enough words precede.
        let keep = self.lm_state.len().min(lm.order());
        let mut context = Vec::with_capacity(keep + 1);
        context.push(lm.bos_id());
        context.extend_from_slice(&self.lm_state[self.lm_state.len() - keep..]);
        self.lm_score_log10 += lm.score_ids(&context, id);
    }

    /// Child prefix `self.prefix + token` with its fusion state.
    fn extend(&self, token: u32, fusion: Option<&Fusion<'_>>) -> Self {
        let mut child = Self {
            prefix: Vec::with_capacity(self.prefix.len() + 1),
            p_blank: f64::NEG_INFINITY,
            p_nonblank: f64::NEG_INFINITY,
            lm_state: self.lm_state.clone(),
            lm_score_log10: self.lm_score_log10,
            word_start: self.word_start,
        };
        child.prefix.extend_from_slice(&self.prefix);
        child.prefix.push(token);
        if let Some(f) = fusion {
            if token == f.vocab.delimiter_id() {
                let end = self.prefix.len();
                child.complete_word(f, end);
                child.word_start = end + 1;
            }
        }
        child
    }

    /// Scores a trailing partial word and the end-of-sentence event.
    fn finish(&mut self, fusion: &Fusion<'_>) {
        let end = self.prefix.len();
        self.complete_word(fusion, end);
        let eos = fusion.lm.eos_id();
        self.score_lm(fusion.lm, eos);
    }
}

fn rank(a: &BeamHypothesis, b: &BeamHypothesis, cfg: &DecodeConfig) -> Ordering {
    b.score(cfg)
        .partial_cmp(&a.score(cfg))
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.prefix.cmp(&b.prefix))
}

/// Prefix beam search over token ids. Returns the final beam, best first;
/// equal scores order by prefix ids.
pub fn prefix_beam_search(
    post: &PosteriorMatrix,
    blank: u32,
    cfg: &DecodeConfig,
    fusion: Option<&Fusion<'_>>,
) -> Result<Vec<BeamHypothesis>, CtcError> {
    if cfg.beam_width == 0 {
        return Err(CtcError::ZeroBeam);
    }
    if blank as usize >= post.vocab_size() {
        return Err(CtcError::ShapeMismatch {
            expected: blank as usize + 1,
            found: post.vocab_size(),
        });
    }

    let mut beam = vec![BeamHypothesis::root()];
    let mut candidates: Vec<usize> = Vec::with_capacity(post.vocab_size());
    for t in 0..post.frames() {
        let row = post.row(t);
        let best = row
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > row[b] { i } else { b });
        candidates.clear();
        candidates.extend((0..row.len()).filter(|&c| {
            c != blank as usize && (c == best || row[c] as f64 >= cfg.prune_log_threshold)
        }));
        let lp_blank = row[blank as usize] as f64;

        let mut next: Vec<BeamHypothesis> = Vec::with_capacity(beam.len() * (candidates.len() + 1));
        let mut index: HashMap<Vec<u32>, usize> = HashMap::with_capacity(next.capacity());
        let mut slot = |hyp: BeamHypothesis, next: &mut Vec<BeamHypothesis>| -> usize {
            if let Some(&i) = index.get(&hyp.prefix) {
                return i;
            }
            index.insert(hyp.prefix.clone(), next.len());
            next.push(hyp);
            next.len() - 1
        };

        for hyp in &beam {
            let total = hyp.acoustic();
            let mut same = hyp.clone();
            same.p_blank = f64::NEG_INFINITY;
            same.p_nonblank = f64::NEG_INFINITY;
            let i = slot(same, &mut next);
            next[i].p_blank = logaddexp(next[i].p_blank, total + lp_blank);

            let last = hyp.prefix.last().copied();
            for &c in &candidates {
                let lp = row[c] as f64;
                let c = c as u32;
                if Some(c) == last {
                    // Without an intervening blank a repeat stays collapsed.
                    next[i].p_nonblank = logaddexp(next[i].p_nonblank, hyp.p_nonblank + lp);
                    if hyp.p_blank > f64::NEG_INFINITY {
                        let j = slot(hyp.extend(c, fusion), &mut next);
                        next[j].p_nonblank = logaddexp(next[j].p_nonblank, hyp.p_blank + lp);
                    }
                } else {
                    let j = slot(hyp.extend(c, fusion), &mut next);
                    next[j].p_nonblank = logaddexp(next[j].p_nonblank, total + lp);
                }
            }
        }

        next.retain(|h| h.acoustic() > f64::NEG_INFINITY);
        next.sort_by(|a, b| rank(a, b, cfg));
        next.truncate(cfg.beam_width);
        beam = next;
    }

    if let Some(f) = fusion {
        for hyp in &mut beam {
            hyp.finish(f);
        }
        beam.sort_by(|a, b| rank(a, b, cfg));
    }
    Ok(beam)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedHypothesis {
    pub text: NormalizedText,
    /// Combined acoustic and fusion score.
    pub score: f64,
    pub acoustic: f64,
    pub lm_log10: f64,
    pub words: usize,
}

/// Beam decoding over a character vocabulary. Hypotheses that decode to the
/// same text keep only their best score. Output is sorted by score, then by
/// text.
pub fn beam_decode(
    post: &PosteriorMatrix,
    vocab: &Vocabulary,
    cfg: &DecodeConfig,
    lm: Option<&NGramModel>,
) -> Result<Vec<RankedHypothesis>, CtcError> {
    check_vocab(post, vocab)?;
    let fusion = lm.map(|lm| Fusion { lm, vocab });
    let beam = prefix_beam_search(post, vocab.blank_id(), cfg, fusion.as_ref())?;
    let mut best: HashMap<NormalizedText, RankedHypothesis> = HashMap::new();
    for hyp in beam {
        let ranked = RankedHypothesis {
            text: vocab.decode(&hyp.prefix),
            score: hyp.score(cfg),
            acoustic: hyp.acoustic(),
            lm_log10: hyp.lm_score_log10,
            words: hyp.words(),
        };
        match best.get(&ranked.text) {
            Some(prev) if prev.score >= ranked.score => {}
            _ => {
                best.insert(ranked.text.clone(), ranked);
            }
        }
    }
    let mut out: Vec<RankedHypothesis> = best.into_values().collect();
    out.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.text.cmp(&b.text))
    });
    Ok(out)
}
