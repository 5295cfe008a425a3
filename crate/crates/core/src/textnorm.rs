//! Transcript normalization and character vocabulary construction.
//!
//! Normalized text uses only `a..=z` and single spaces between words. The
//! character vocabulary maps a space onto the `|` word delimiter and appends
//! the `[UNK]` and `[PAD]` specials, with `[PAD]` doubling as the CTC blank.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

pub const WORD_DELIMITER: &str = "|";
pub const UNK_TOKEN: &str = "[UNK]";
pub const PAD_TOKEN: &str = "[PAD]";

#[derive(Debug, Error)]
pub enum TextNormError {
    #[error("corpus contains no characters after normalization")]
    EmptyCorpus,
    #[error("duplicate token {token:?} at line {line}")]
    DuplicateToken { token: String, line: usize },
    #[error("vocabulary is missing required token {0:?}")]
    MissingSpecial(&'static str),
    #[error("vocabulary contains a literal space token at line {0}")]
    SpaceToken(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Text made of lowercase Latin letters separated by single spaces.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalizedText(String);

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.split(' ').filter(|w| !w.is_empty())
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Lowercases, drops every character outside `a..=z` and whitespace, and
/// collapses whitespace runs into one space.
///
/// Removed characters are deleted outright, so `ke-pasar` becomes `kepasar`.
pub fn normalize(raw: &str) -> NormalizedText {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars().flat_map(char::to_lowercase) {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else if ch.is_ascii_lowercase() {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    NormalizedText(out)
}

/// True when `raw` holds ASCII digits, which [`normalize`] silently drops.
pub fn has_digits(raw: &str) -> bool {
    raw.chars().any(|c| c.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    delimiter_id: u32,
    unk_id: u32,
    blank_id: u32,
}

impl Vocabulary {
    /// Builds a vocabulary from an explicit token list, validating the
    /// required specials.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, TextNormError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok == " " {
                return Err(TextNormError::SpaceToken(i + 1));
            }
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(TextNormError::DuplicateToken {
                    token: tok.clone(),
                    line: i + 1,
                });
            }
        }
        let find = |name: &'static str| {
            index
                .get(name)
                .copied()
                .ok_or(TextNormError::MissingSpecial(name))
        };
        let delimiter_id = find(WORD_DELIMITER)?;
        let unk_id = find(UNK_TOKEN)?;
        let blank_id = find(PAD_TOKEN)?;
        Ok(Self {
            tokens,
            index,
            delimiter_id,
            unk_id,
            blank_id,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn delimiter_id(&self) -> u32 {
        self.delimiter_id
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn blank_id(&self) -> u32 {
        self.blank_id
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Maps every character to its token id; spaces become the delimiter and
    /// characters outside the vocabulary become `[UNK]`.
    pub fn encode(&self, text: &NormalizedText) -> Vec<u32> {
        let mut buf = [0u8; 4];
        text.as_str()
            .chars()
            .map(|c| {
                if c == ' ' {
                    self.delimiter_id
                } else {
                    self.id(c.encode_utf8(&mut buf)).unwrap_or(self.unk_id)
                }
            })
            .collect()
    }

    /// Inverse of [`Vocabulary::encode`]. Blanks are skipped, the delimiter
    /// becomes a space, and the result is re-normalized so stray delimiters
    /// never produce leading or doubled spaces.
    pub fn decode(&self, ids: &[u32]) -> NormalizedText {
        let mut raw = String::with_capacity(ids.len());
        for &id in ids {
            if id == self.blank_id {
                continue;
            }
            if id == self.delimiter_id {
                raw.push(' ');
            } else if let Some(tok) = self.token(id) {
                raw.push_str(tok);
            }
        }
        normalize(&raw)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for tok in &self.tokens {
            out.write_all(tok.as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, TextNormError> {
        let mut tokens = Vec::new();
        for line in input.lines() {
            let line = line?;
            tokens.push(line.strip_suffix('\r').unwrap_or(&line).to_string());
        }
        // A trailing newline produces no extra token, but a final empty line
        // written by other tools would.
        while tokens.last().is_some_and(|t| t.is_empty()) {
            tokens.pop();
        }
        Self::from_tokens(tokens)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TextNormError> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextNormError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }
}

/// Collects the distinct characters of all transcripts, sorted by code point
/// with space mapped to `|`, then appends `[UNK]` and `[PAD]`.
pub fn build_vocab<'a, I>(transcripts: I) -> Result<Vocabulary, TextNormError>
where
    I: IntoIterator<Item = &'a NormalizedText>,
{
    let chars: BTreeSet<char> = transcripts
        .into_iter()
        .flat_map(|t| t.as_str().chars())
        .map(|c| if c == ' ' { '|' } else { c })
        .collect();
    if chars.is_empty() {
        return Err(TextNormError::EmptyCorpus);
    }
    let mut tokens: Vec<String> = chars.into_iter().map(String::from).collect();
    // '|' sorts after 'z' but a single-word corpus never produces it.
    if !tokens.iter().any(|t| t == WORD_DELIMITER) {
        tokens.push(WORD_DELIMITER.to_string());
    }
    tokens.push(UNK_TOKEN.to_string());
    tokens.push(PAD_TOKEN.to_string());
    Vocabulary::from_tokens(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm_all(xs: &[&str]) -> Vec<NormalizedText> {
        xs.iter().map(|s| normalize(s)).collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("Halo, Dunia!").as_str(), "halo dunia");
        assert_eq!(normalize("").as_str(), "");
        assert_eq!(normalize("   ").as_str(), "");
        assert_eq!(normalize("Café 2 été").as_str(), "caf t");
    }

    #[test]
    fn normalize_deletes_punctuation_without_spacing() {
        // Character walk: "  SAYA   pergi...ke-pasar "
        //   leading spaces dropped, SAYA -> saya, space run -> ' ',
        //   pergi kept, '...' deleted, ke kept, '-' deleted, pasar kept,
        //   trailing space dropped.
        assert_eq!(
            normalize("  SAYA   pergi...ke-pasar ").as_str(),
            "saya pergikepasar"
        );
    }

    #[test]
    fn digits_are_flagged() {
        assert!(has_digits("jam 5 pagi"));
        assert!(!has_digits("jam lima pagi"));
        assert_eq!(normalize("jam 5 pagi").as_str(), "jam pagi");
    }

    #[test]
    fn vocab_two_letters() {
        let v = build_vocab(&norm_all(&["ab ba"])).unwrap();
        assert_eq!(v.tokens(), ["a", "b", "|", "[UNK]", "[PAD]"]);
        assert_eq!(v.blank_id(), 4);
        assert_eq!(v.delimiter_id(), 2);
        assert_eq!(v.unk_id(), 3);
    }

    #[test]
    fn vocab_enumerated_by_hand() {
        // halo dunia + halo kamu -> {a,d,h,i,k,l,m,n,o,u} then | [UNK] [PAD]
        let v = build_vocab(&norm_all(&["halo dunia", "halo kamu"])).unwrap();
        assert_eq!(
            v.tokens(),
            ["a", "d", "h", "i", "k", "l", "m", "n", "o", "u", "|", "[UNK]", "[PAD]"]
        );
        assert_eq!(v.len(), 13);
    }

    #[test]
    fn vocab_single_word_still_has_delimiter() {
        let v = build_vocab(&norm_all(&["aba"])).unwrap();
        assert_eq!(v.tokens(), ["a", "b", "|", "[UNK]", "[PAD]"]);
    }

    #[test]
    fn vocab_empty_corpus() {
        assert!(matches!(
            build_vocab(&norm_all(&[""])),
            Err(TextNormError::EmptyCorpus)
        ));
        assert!(matches!(build_vocab(&[]), Err(TextNormError::EmptyCorpus)));
    }

    #[test]
    fn encode_examples() {
        let v = build_vocab(&norm_all(&["ab ba"])).unwrap();
        assert_eq!(v.encode(&normalize("ab a")), vec![0, 1, 2, 0]);
        assert_eq!(v.encode(&normalize("ax")), vec![0, 3]);
        assert!(v.encode(&normalize("")).is_empty());
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = build_vocab(&norm_all(&["halo dunia"])).unwrap();
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        assert!(buf.ends_with(b"[PAD]\n"));
        let back = Vocabulary::read(&buf[..]).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn vocab_rejects_bad_tables() {
        let toks = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(matches!(
            Vocabulary::from_tokens(toks(&["a", "|", "[UNK]"])),
            Err(TextNormError::MissingSpecial("[PAD]"))
        ));
        assert!(matches!(
            Vocabulary::from_tokens(toks(&["a", "a", "|", "[UNK]", "[PAD]"])),
            Err(TextNormError::DuplicateToken { line: 2, .. })
        ));
        assert!(matches!(
            Vocabulary::from_tokens(toks(&["a", " ", "|", "[UNK]", "[PAD]"])),
            Err(TextNormError::SpaceToken(2))
        ));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize(&s);
            let twice = normalize(once.as_str());
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.as_str().chars().all(|c| c == ' ' || c.is_ascii_lowercase()));
            prop_assert!(!once.as_str().starts_with(' ') && !once.as_str().ends_with(' '));
            prop_assert!(!once.as_str().contains("  "));
        }

        #[test]
        fn decode_inverts_encode(s in "[a-e ]{0,30}") {
            let vocab = build_vocab(&norm_all(&["abcde a"])).unwrap();
            let text = normalize(&s);
            prop_assert_eq!(vocab.decode(&vocab.encode(&text)), text);
        }

        #[test]
        fn vocab_ignores_transcript_order(
            mut lines in proptest::collection::vec("[a-z ]{1,12}", 1..8),
            seed in any::<u64>(),
        ) {
            let a = build_vocab(&lines.iter().map(|s| normalize(s)).collect::<Vec<_>>());
            let n = lines.len();
            lines.rotate_left((seed as usize) % n);
            lines.reverse();
            let b = build_vocab(&lines.iter().map(|s| normalize(s)).collect::<Vec<_>>());
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "order changed the outcome"),
            }
        }
    }
}
