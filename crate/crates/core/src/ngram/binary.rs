//! Little-endian binary model layout:
//!
//! ```text
//! "NGLM" | version u32 | order u8
//! word count u32 | { byte length u32 | UTF-8 bytes } * word count
//! per order n: entry count u64 | { n word ids u32 | prob f32 | backoff f32 } * count
//! ```
//!
//! Entries are sorted by word-id sequence so lookups binary-search in place.

use std::io::{BufWriter, Write};
use std::path::Path;

use super::model::{NGramModel, OrderTable};
use super::{LmError, MAX_ORDER};

pub const BINARY_MAGIC: [u8; 4] = *b"NGLM";
pub const BINARY_VERSION: u32 = 1;

pub fn write_binary(model: &NGramModel, path: impl AsRef<Path>) -> Result<(), LmError> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    encode(model, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn encode<W: Write>(model: &NGramModel, out: &mut W) -> std::io::Result<()> {
    out.write_all(&BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&[model.order() as u8])?;
    out.write_all(&(model.words().len() as u32).to_le_bytes())?;
    for w in model.words() {
        out.write_all(&(w.len() as u32).to_le_bytes())?;
        out.write_all(w.as_bytes())?;
    }
    for table in model.tables() {
        out.write_all(&(table.len() as u64).to_le_bytes())?;
        for (key, prob, backoff) in table.iter() {
            for id in key {
                out.write_all(&id.to_le_bytes())?;
            }
            out.write_all(&prob.to_le_bytes())?;
            out.write_all(&backoff.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<NGramModel, LmError> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LmError> {
        let end = self.pos.checked_add(n).ok_or(LmError::TruncatedFile)?;
        let slice = self.buf.get(self.pos..end).ok_or(LmError::TruncatedFile)?;
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], LmError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, LmError> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, LmError> {
        self.array().map(u64::from_le_bytes)
    }

    fn f32(&mut self) -> Result<f32, LmError> {
        self.array().map(f32::from_le_bytes)
    }
}

pub fn decode(bytes: &[u8]) -> Result<NGramModel, LmError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if bytes.len() < 4 {
        return Err(if BINARY_MAGIC.starts_with(bytes) && !bytes.is_empty() {
            LmError::TruncatedFile
        } else {
            LmError::BadMagic
        });
    }
    if cur.array::<4>()? != BINARY_MAGIC {
        return Err(LmError::BadMagic);
    }
    let version = cur.u32()?;
    if version != BINARY_VERSION {
        return Err(LmError::VersionMismatch {
            found: version,
            expected: BINARY_VERSION,
        });
    }
    let order = cur.array::<1>()?[0] as usize;
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(LmError::Corrupt(format!("order {order}")));
    }
    let n_words = cur.u32()? as usize;
    let mut words = Vec::with_capacity(n_words.min(bytes.len()));
    for _ in 0..n_words {
        let len = cur.u32()? as usize;
        let raw = cur.take(len)?;
        let w = std::str::from_utf8(raw)
            .map_err(|_| LmError::Corrupt("word is not valid UTF-8".into()))?;
        words.push(w.to_string());
    }

    let mut tables = Vec::with_capacity(order);
    for n in 1..=order {
        let count = cur.u64()?;
        let entry_size = 4 * n as u64 + 8;
        let remaining = (bytes.len() - cur.pos) as u64;
        if count.saturating_mul(entry_size) > remaining {
            return Err(LmError::TruncatedFile);
        }
        let count = count as usize;
        let mut keys = Vec::with_capacity(count * n);
        let mut probs = Vec::with_capacity(count);
        let mut backoffs = Vec::with_capacity(count);
        for i in 0..count {
            let start = keys.len();
            for _ in 0..n {
                let id = cur.u32()?;
                if id as usize >= words.len() {
                    return Err(LmError::Corrupt(format!("word id {id} out of range")));
                }
                keys.push(id);
            }
            if i > 0 && keys[start - n..start] >= keys[start..] {
                return Err(LmError::Corrupt(format!("{n}-gram entries are not sorted")));
            }
            probs.push(cur.f32()?);
            backoffs.push(cur.f32()?);
        }
        tables.push(OrderTable::from_sorted_parts(n, keys, probs, backoffs));
    }
    if cur.pos != bytes.len() {
        return Err(LmError::Corrupt("trailing bytes".into()));
    }
    Ok(NGramModel::from_tables(words, tables))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngram::{count_ngrams, estimate, CountOptions, Smoothing};
    use crate::textnorm::normalize;

    fn toy() -> NGramModel {
        let corpus: Vec<_> = ["saya pergi ke pasar", "dia pergi ke sekolah", "saya makan"]
            .iter()
            .map(|s| normalize(s))
            .collect();
        let c = count_ngrams(&corpus, 5, CountOptions::default()).unwrap();
        estimate(&c, Smoothing::ModifiedKneserNey).unwrap().model
    }

    fn bytes(m: &NGramModel) -> Vec<u8> {
        let mut buf = Vec::new();
        encode(m, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_identical() {
        let m = toy();
        let back = decode(&bytes(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn header_errors() {
        let good = bytes(&toy());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(LmError::BadMagic)));
        let mut bad = good.clone();
        bad[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            decode(&bad),
            Err(LmError::VersionMismatch { found: 7, .. })
        ));
        for cut in [2, 6, 9, 20, good.len() - 1] {
            assert!(
                matches!(decode(&good[..cut]), Err(LmError::TruncatedFile)),
                "cut at {cut}"
            );
        }
        assert!(matches!(decode(b""), Err(LmError::BadMagic)));
    }
}
