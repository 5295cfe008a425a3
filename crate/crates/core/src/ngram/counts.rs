use std::collections::HashMap;

use rayon::prelude::*;

use super::{LmError, BOS, EOS, MAX_ORDER, UNK};
use crate::textnorm::NormalizedText;

#[derive(Debug, Clone, Copy)]
pub struct CountOptions {
    /// Words seen fewer times than this are mapped to `<unk>`. 1 keeps all.
    pub unk_threshold: u64,
}

impl Default for CountOptions {
    fn default() -> Self {
        Self { unk_threshold: 1 }
    }
}

/// Raw n-gram counts for orders `1..=order` over word ids.
///
/// Ids 0, 1 and 2 are `<unk>`, `<s>` and `</s>`; other words follow in order
/// of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramCounts {
    pub order: usize,
    pub vocab: Vec<String>,
    /// `counts[n - 1]` holds the n-grams.
    pub counts: Vec<HashMap<Vec<u32>, u64>>,
}

impl NGramCounts {
    pub const UNK_ID: u32 = 0;
    pub const BOS_ID: u32 = 1;
    pub const EOS_ID: u32 = 2;

    pub fn count(&self, words: &[&str]) -> u64 {
        if words.is_empty() || words.len() > self.order {
            return 0;
        }
        let ids: Option<Vec<u32>> = words
            .iter()
            .map(|w| self.vocab.iter().position(|v| v == w).map(|i| i as u32))
            .collect();
        ids.and_then(|ids| self.counts[ids.len() - 1].get(&ids).copied())
            .unwrap_or(0)
    }
}

/// Wraps each sentence in `<s> ... </s>` and counts every n-gram up to
/// `order`. Empty sentences still contribute `<s> </s>`.
pub fn count_ngrams(
    corpus: &[NormalizedText],
    order: usize,
    opts: CountOptions,
) -> Result<NGramCounts, LmError> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(LmError::BadOrder(order));
    }
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }

    let mut word_freq: HashMap<&str, u64> = HashMap::new();
    for w in corpus.iter().flat_map(|s| s.words()) {
        *word_freq.entry(w).or_insert(0) += 1;
    }

    let mut vocab = vec![UNK.to_string(), BOS.to_string(), EOS.to_string()];
    let mut index: HashMap<&str, u32> = HashMap::new();
    let sentences: Vec<Vec<u32>> = corpus
        .iter()
        .map(|sent| {
            let mut ids = vec![NGramCounts::BOS_ID];
            for w in sent.words() {
                let id = if word_freq[w] < opts.unk_threshold {
                    NGramCounts::UNK_ID
                } else {
                    *index.entry(w).or_insert_with(|| {
                        vocab.push(w.to_string());
                        (vocab.len() - 1) as u32
                    })
                };
                ids.push(id);
            }
            ids.push(NGramCounts::EOS_ID);
            ids
        })
        .collect();

    let empty = || vec![HashMap::new(); order];
    let counts = sentences
        .par_iter()
        .fold(empty, |mut acc, ids| {
            for n in 1..=order {
                for gram in ids.windows(n) {
                    *acc[n - 1].entry(gram.to_vec()).or_insert(0) += 1;
                }
            }
            acc
        })
        .reduce(empty, |mut a, b| {
            for (dst, src) in a.iter_mut().zip(b) {
                for (k, v) in src {
                    *dst.entry(k).or_insert(0) += v;
                }
            }
            a
        });

    Ok(NGramCounts {
        order,
        vocab,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textnorm::normalize;
    use proptest::prelude::*;

    fn corpus(xs: &[&str]) -> Vec<NormalizedText> {
        xs.iter().map(|s| normalize(s)).collect()
    }

    #[test]
    fn bigram_hand_enumeration() {
        let c = count_ngrams(&corpus(&["a b"]), 2, CountOptions::default()).unwrap();
        assert_eq!(c.counts[1].len(), 3);
        assert_eq!(c.count(&["<s>", "a"]), 1);
        assert_eq!(c.count(&["a", "b"]), 1);
        assert_eq!(c.count(&["b", "</s>"]), 1);
        assert_eq!(c.counts[0].len(), 4);
        for w in ["a", "b", "<s>", "</s>"] {
            assert_eq!(c.count(&[w]), 1, "{w}");
        }
    }

    #[test]
    fn unigram_only() {
        let c = count_ngrams(&corpus(&["a"]), 1, CountOptions::default()).unwrap();
        assert_eq!(c.counts.len(), 1);
        assert_eq!(c.counts[0].len(), 3);
        assert_eq!(c.count(&["a"]), 1);
        assert_eq!(c.count(&["</s>"]), 1);
        assert_eq!(c.count(&["<s>"]), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            count_ngrams(&[], 3, CountOptions::default()),
            Err(LmError::EmptyCorpus)
        ));
        assert!(matches!(
            count_ngrams(&corpus(&["a"]), 6, CountOptions::default()),
            Err(LmError::BadOrder(6))
        ));
    }

    #[test]
    fn unk_threshold_maps_rare_words() {
        let c = count_ngrams(
            &corpus(&["a b", "a c"]),
            2,
            CountOptions { unk_threshold: 2 },
        )
        .unwrap();
        assert_eq!(c.count(&["<unk>"]), 2);
        assert_eq!(c.count(&["a", "<unk>"]), 2);
        assert_eq!(c.count(&["b"]), 0);
    }

    #[test]
    fn ids_follow_first_appearance() {
        let c = count_ngrams(
            &corpus(&["kamu halo", "halo dunia"]),
            1,
            CountOptions::default(),
        )
        .unwrap();
        assert_eq!(c.vocab, ["<unk>", "<s>", "</s>", "kamu", "halo", "dunia"]);
    }

    proptest! {
        #[test]
        fn lower_orders_dominate_extensions(
            lines in proptest::collection::vec("[a-d]( [a-d]){0,6}", 1..6),
            order in 2usize..=4,
        ) {
            let c = count_ngrams(&corpus(&lines.iter().map(String::as_str).collect::<Vec<_>>()),
                order, CountOptions::default()).unwrap();
            for n in 1..order {
                for (gram, &cnt) in &c.counts[n - 1] {
                    let ext: u64 = c.counts[n]
                        .iter()
                        .filter(|(k, _)| k[..n] == gram[..])
                        .map(|(_, v)| v)
                        .sum();
                    prop_assert!(cnt >= ext);
                }
            }
        }
    }
}
