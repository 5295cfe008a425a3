use std::cmp::Ordering;
use std::collections::HashMap;

use super::{BOS, EOS, LOG10_ZERO, UNK};

/// Entries of one order, sorted by word-id sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrderTable {
    n: usize,
    keys: Vec<u32>,
    probs: Vec<f32>,
    backoffs: Vec<f32>,
}

impl OrderTable {
    pub(crate) fn new(n: usize, mut entries: Vec<(Vec<u32>, f32, f32)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|a, b| a.0 == b.0);
        let mut keys = Vec::with_capacity(entries.len() * n);
        let mut probs = Vec::with_capacity(entries.len());
        let mut backoffs = Vec::with_capacity(entries.len());
        for (k, p, b) in entries {
            debug_assert_eq!(k.len(), n);
            keys.extend_from_slice(&k);
            probs.push(p);
            backoffs.push(b);
        }
        Self {
            n,
            keys,
            probs,
            backoffs,
        }
    }

    /// Builds a table from parallel arrays that are already sorted.
    pub(crate) fn from_sorted_parts(
        n: usize,
        keys: Vec<u32>,
        probs: Vec<f32>,
        backoffs: Vec<f32>,
    ) -> Self {
        Self {
            n,
            keys,
            probs,
            backoffs,
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn key(&self, i: usize) -> &[u32] {
        &self.keys[i * self.n..(i + 1) * self.n]
    }

    pub fn prob(&self, i: usize) -> f32 {
        self.probs[i]
    }

    pub fn backoff(&self, i: usize) -> f32 {
        self.backoffs[i]
    }

    pub(crate) fn set_backoff(&mut self, i: usize, value: f32) {
        self.backoffs[i] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f32, f32)> + '_ {
        (0..self.len()).map(move |i| (self.key(i), self.probs[i], self.backoffs[i]))
    }

    pub fn find(&self, gram: &[u32]) -> Option<usize> {
        if gram.len() != self.n {
            return None;
        }
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            match self.key(mid).cmp(gram) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Index range of entries whose key starts with `prefix`.
    pub fn prefix_range(&self, prefix: &[u32]) -> std::ops::Range<usize> {
        let p = prefix.len();
        let lower = partition_point(self.len(), |i| &self.key(i)[..p] < prefix);
        let upper = partition_point(self.len(), |i| &self.key(i)[..p] <= prefix);
        lower..upper
    }
}

fn partition_point(len: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0usize, len);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// An immutable backoff n-gram model.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    words: Vec<String>,
    word_index: HashMap<String, u32>,
    tables: Vec<OrderTable>,
    unk_id: u32,
    bos_id: u32,
    eos_id: u32,
}

impl NGramModel {
    /// Assembles a model from a word table and per-order tables. `<unk>`,
    /// `<s>` and `</s>` are appended to the word table when missing.
    pub fn from_tables(mut words: Vec<String>, tables: Vec<OrderTable>) -> Self {
        for special in [UNK, BOS, EOS] {
            if !words.iter().any(|w| w == special) {
                words.push(special.to_string());
            }
        }
        let word_index: HashMap<String, u32> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let unk_id = word_index[UNK];
        let bos_id = word_index[BOS];
        let eos_id = word_index[EOS];
        Self {
            words,
            word_index,
            tables,
            unk_id,
            bos_id,
            eos_id,
        }
    }

    pub fn order(&self) -> usize {
        self.tables.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn tables(&self) -> &[OrderTable] {
        &self.tables
    }

    pub(crate) fn tables_mut(&mut self) -> &mut [OrderTable] {
        &mut self.tables
    }

    pub fn entry_count(&self) -> usize {
        self.tables.iter().map(OrderTable::len).sum()
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn bos_id(&self) -> u32 {
        self.bos_id
    }

    pub fn eos_id(&self) -> u32 {
        self.eos_id
    }

    /// Id of `word`, with unknown words mapped to `<unk>`.
    pub fn word_id(&self, word: &str) -> u32 {
        self.word_index.get(word).copied().unwrap_or(self.unk_id)
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    /// Stored log10 probability and backoff of an exact n-gram.
    pub fn lookup(&self, gram: &[u32]) -> Option<(f32, f32)> {
        let table = self.tables.get(gram.len().checked_sub(1)?)?;
        table.find(gram).map(|i| (table.prob(i), table.backoff(i)))
    }

    fn backoff_of(&self, context: &[u32]) -> f32 {
        self.lookup(context).map_or(0.0, |(_, b)| b)
    }

    /// log10 P(word | history) by the backoff recursion over ids. History
    /// longer than `order - 1` is truncated from the left.
    pub fn score_ids(&self, history: &[u32], word: u32) -> f64 {
        let keep = history.len().min(self.order().saturating_sub(1));
        let mut context = &history[history.len() - keep..];
        let mut gram: Vec<u32> = Vec::with_capacity(keep + 1);
        let mut acc = 0.0f64;
        loop {
            gram.clear();
            gram.extend_from_slice(context);
            gram.push(word);
            if let Some((p, _)) = self.lookup(&gram) {
                return acc + p as f64;
            }
            if context.is_empty() {
                return acc + LOG10_ZERO as f64;
            }
            acc += self.backoff_of(context) as f64;
            context = &context[1..];
        }
    }

    /// log10 P(word | history) for string words; unknown words map to
    /// `<unk>`.
    pub fn score_word<S: AsRef<str>>(&self, history: &[S], word: &str) -> f64 {
        let ids: Vec<u32> = history.iter().map(|w| self.word_id(w.as_ref())).collect();
        self.score_ids(&ids, self.word_id(word))
    }

    /// Sum of word scores with `<s>` as initial context and a final `</s>`.
    pub fn score_sentence<S: AsRef<str>>(&self, sentence: &[S]) -> f64 {
        let mut history = vec![self.bos_id];
        let mut total = 0.0;
        for w in sentence {
            let id = self.word_id(w.as_ref());
            total += self.score_ids(&history, id);
            history.push(id);
        }
        total + self.score_ids(&history, self.eos_id)
    }

    /// Every word a query can predict: all words except `<s>`.
    pub fn predictable_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.words.len() as u32).filter(move |&id| id != self.bos_id)
    }
}
