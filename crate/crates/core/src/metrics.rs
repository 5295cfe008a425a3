//! Word error rate and benchmark tables.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::textnorm::normalize;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("reference for utterance {0:?} has no words")]
    EmptyReference(String),
    #[error("no utterances to score")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

impl std::ops::AddAssign for EditCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.substitutions += rhs.substitutions;
        self.deletions += rhs.deletions;
        self.insertions += rhs.insertions;
    }
}

/// Unit-cost Levenshtein alignment of `hypothesis` against `reference`.
/// The backtrace prefers the diagonal, then deletion, then insertion.
pub fn edit_counts<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for (j, cell) in d[..w].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }

    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let diff = usize::from(reference[i - 1] != hypothesis[j - 1]);
            if d[(i - 1) * w + j - 1] + diff == here {
                counts.substitutions += diff;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

pub fn word_edit_distance<S: AsRef<str>>(
    reference: &[S],
    hypothesis: &[S],
) -> Result<EditCounts, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference(String::new()));
    }
    let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let h: Vec<&str> = hypothesis.iter().map(AsRef::as_ref).collect();
    Ok(edit_counts(&r, &h))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtteranceScore {
    pub id: String,
    #[serde(flatten)]
    pub edits: EditCounts,
    pub reference_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WerReport {
    #[serde(flatten)]
    pub edits: EditCounts,
    pub reference_words: usize,
    pub wer: f64,
    pub utterances: Vec<UtteranceScore>,
}

/// Normalizes both sides, aligns each pair, and pools the counts over the
/// whole set before dividing.
pub fn corpus_wer<'a, I>(pairs: I) -> Result<WerReport, MetricsError>
where
    I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
{
    let mut total = EditCounts::default();
    let mut words = 0usize;
    let mut utterances = Vec::new();
    for (id, reference, hypothesis) in pairs {
        let r = normalize(reference);
        let h = normalize(hypothesis);
        let rw: Vec<&str> = r.words().collect();
        let hw: Vec<&str> = h.words().collect();
        if rw.is_empty() {
            return Err(MetricsError::EmptyReference(id.to_string()));
        }
        let edits = edit_counts(&rw, &hw);
        total += edits;
        words += rw.len();
        utterances.push(UtteranceScore {
            id: id.to_string(),
            edits,
            reference_words: rw.len(),
        });
    }
    if utterances.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(WerReport {
        edits: total,
        reference_words: words,
        wer: total.total() as f64 / words as f64,
        utterances,
    })
}

/// Character error rate over normalized text, spaces included.
pub fn char_error_rate(reference: &str, hypothesis: &str) -> Option<f64> {
    let r: Vec<char> = normalize(reference).as_str().chars().collect();
    let h: Vec<char> = normalize(hypothesis).as_str().chars().collect();
    (!r.is_empty()).then(|| edit_counts(&r, &h).total() as f64 / r.len() as f64)
}

pub const MISSING_CELL: &str = "–";

pub fn format_percent(wer: f64) -> String {
    format!("{:.3}%", wer * 100.0)
}

/// WER table: one row per LM configuration, one column per test set, and a
/// trailing column with the mean over the row's present cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultGrid {
    rows: Vec<String>,
    columns: Vec<String>,
    cells: HashMap<(usize, usize), f64>,
}

impl ResultGrid {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares rows and columns up front so absent cells still render.
    pub fn with_axes<R, C>(rows: R, columns: C) -> Self
    where
        R: IntoIterator,
        R::Item: Into<String>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        let mut grid = Self::new();
        for r in rows {
            grid.row_index(r.into());
        }
        for c in columns {
            grid.column_index(c.into());
        }
        grid
    }

    fn row_index(&mut self, name: String) -> usize {
        match self.rows.iter().position(|r| *r == name) {
            Some(i) => i,
            None => {
                self.rows.push(name);
                self.rows.len() - 1
            }
        }
    }

    fn column_index(&mut self, name: String) -> usize {
        match self.columns.iter().position(|c| *c == name) {
            Some(i) => i,
            None => {
                self.columns.push(name);
                self.columns.len() - 1
            }
        }
    }

    pub fn insert(&mut self, test_set: &str, lm_config: &str, wer: f64) {
        let c = self.column_index(test_set.to_string());
        let r = self.row_index(lm_config.to_string());
        self.cells.insert((r, c), wer);
    }

    pub fn get(&self, test_set: &str, lm_config: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == lm_config)?;
        let c = self.columns.iter().position(|x| x == test_set)?;
        self.cells.get(&(r, c)).copied()
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn row_average(&self, lm_config: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == lm_config)?;
        let vals: Vec<f64> = (0..self.columns.len())
            .filter_map(|c| self.cells.get(&(r, c)).copied())
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    fn table(&self) -> Vec<Vec<String>> {
        let mut out = Vec::with_capacity(self.rows.len() + 1);
        let mut header = vec!["Language Model".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("AVG WER".into());
        out.push(header);
        for (r, name) in self.rows.iter().enumerate() {
            let mut line = vec![name.clone()];
            for c in 0..self.columns.len() {
                line.push(
                    self.cells
                        .get(&(r, c))
                        .map_or_else(|| MISSING_CELL.to_string(), |&w| format_percent(w)),
                );
            }
            line.push(
                self.row_average(name)
                    .map_or_else(|| MISSING_CELL.to_string(), format_percent),
            );
            out.push(line);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for line in self.table() {
            let fields: Vec<String> = line.iter().map(|f| csv_field(f)).collect();
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let table = self.table();
        let ncol = table[0].len();
        let widths: Vec<usize> = (0..ncol)
            .map(|c| {
                table
                    .iter()
                    .map(|l| l[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut s = String::new();
        for line in &table {
            for (c, field) in line.iter().enumerate() {
                let pad = widths[c] - field.chars().count();
                if c == 0 {
                    let _ = write!(s, "{field}{}", " ".repeat(pad));
                } else {
                    let _ = write!(s, "  {}{field}", " ".repeat(pad));
                }
            }
            s.push('\n');
        }
        s
    }
}

fn csv_field(f: &str) -> String {
    if f.contains([',', '"', '\n']) {
        format!("\"{}\"", f.replace('"', "\"\""))
    } else {
        f.to_string()
    }
}

/// Builds a grid from `(test set, LM config) -> report` results; rows and
/// columns keep first-seen order.
pub fn report_grid<'a, I>(results: I) -> ResultGrid
where
    I: IntoIterator<Item = (&'a str, &'a str, &'a WerReport)>,
{
    let mut grid = ResultGrid::new();
    for (set, lm, report) in results {
        grid.insert(set, lm, report.wer);
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    fn counts(s: usize, d: usize, i: usize) -> EditCounts {
        EditCounts {
            substitutions: s,
            deletions: d,
            insertions: i,
        }
    }

    #[test]
    fn edit_examples() {
        assert_eq!(
            word_edit_distance(&w("halo dunia"), &w("halo dunia")).unwrap(),
            counts(0, 0, 0)
        );
        assert_eq!(
            word_edit_distance(&w("a b c d"), &w("a x c")).unwrap(),
            counts(1, 1, 0)
        );
        assert_eq!(
            word_edit_distance(&w("a"), &w("a b b")).unwrap(),
            counts(0, 0, 2)
        );
        assert!(matches!(
            word_edit_distance(&w(""), &w("a")),
            Err(MetricsError::EmptyReference(_))
        ));
    }

    #[test]
    fn wer_examples() {
        let r = corpus_wer([("1", "a b c d", "a x c")]).unwrap();
        assert!((r.wer - 0.5).abs() < 1e-12);
        let r = corpus_wer([("1", "a", "a b b")]).unwrap();
        assert!((r.wer - 2.0).abs() < 1e-12);
        let r = corpus_wer([
            ("1", "halo dunia", "halo dunia"),
            ("2", "halo dunia", "halo dunia"),
        ])
        .unwrap();
        assert_eq!(r.wer, 0.0);
        // 0 + 2 errors over 4 + 4 words.
        let r = corpus_wer([("1", "a b c d", "a b c d"), ("2", "a b c d", "a x c")]).unwrap();
        assert!((r.wer - 0.25).abs() < 1e-12);
        assert_eq!(corpus_wer([]), Err(MetricsError::EmptyInput));
        assert_eq!(
            corpus_wer([("ok", "a", "a"), ("u7", "...", "a")]),
            Err(MetricsError::EmptyReference("u7".into()))
        );
    }

    #[test]
    fn pooled_differs_from_mean_of_rates() {
        // Utterance 1: 1 error / 1 word. Utterance 2: 0 / 9.
        let r = corpus_wer([
            ("1", "a", "b"),
            ("2", "a b c d e f g h i", "a b c d e f g h i"),
        ])
        .unwrap();
        assert!((r.wer - 0.1).abs() < 1e-12);
        let mean = r
            .utterances
            .iter()
            .map(|u| u.edits.total() as f64 / u.reference_words as f64)
            .sum::<f64>()
            / 2.0;
        assert!((mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalization_applies_to_both_sides() {
        let r = corpus_wer([("1", "Halo, Dunia!", "halo   dunia")]).unwrap();
        assert_eq!(r.wer, 0.0);
    }

    #[test]
    fn cer() {
        assert_eq!(char_error_rate("abc", "abd"), Some(1.0 / 3.0));
        assert_eq!(char_error_rate("", "abd"), None);
    }

    #[test]
    fn grid_rendering() {
        let mut g = ResultGrid::new();
        g.insert("Common Voice", "-", 0.20306);
        assert_eq!(
            g.to_csv(),
            "Language Model,Common Voice,AVG WER\n-,20.306%,20.306%\n"
        );
        let mut g = ResultGrid::with_axes(["-", "5-gram"], ["A", "B"]);
        g.insert("A", "-", 0.1);
        g.insert("B", "-", 0.3);
        g.insert("A", "5-gram", 0.05);
        assert!((g.row_average("-").unwrap() - 0.2).abs() < 1e-12);
        let csv = g.to_csv();
        assert!(csv.contains("-,10.000%,30.000%,20.000%\n"), "{csv}");
        assert!(csv.contains("5-gram,5.000%,–,5.000%\n"), "{csv}");
        let text = g.to_text();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().starts_with("Language Model"));
    }

    #[test]
    fn grid_from_reports() {
        let rep = corpus_wer([("1", "a b", "a c")]).unwrap();
        let g = report_grid([("set1", "-", &rep), ("set1", "2-gram", &rep)]);
        assert_eq!(g.rows(), ["-", "2-gram"]);
        assert_eq!(g.get("set1", "2-gram"), Some(0.5));
        assert!(csv_field("a,b") == "\"a,b\"");
    }

    proptest! {
        #[test]
        fn cost_is_symmetric(
            a in proptest::collection::vec(0u8..4, 0..7),
            b in proptest::collection::vec(0u8..4, 0..7),
        ) {
            let ab = edit_counts(&a, &b);
            let ba = edit_counts(&b, &a);
            prop_assert_eq!(ab.total(), ba.total());
            prop_assert!(ab.substitutions + ab.deletions <= a.len());
        }

        #[test]
        fn triangle_inequality(
            a in proptest::collection::vec(0u8..3, 0..6),
            b in proptest::collection::vec(0u8..3, 0..6),
            c in proptest::collection::vec(0u8..3, 0..6),
        ) {
            let ac = edit_counts(&a, &c).total();
            let ab = edit_counts(&a, &b).total();
            let bc = edit_counts(&b, &c).total();
            prop_assert!(ac <= ab + bc);
        }
    }
}
