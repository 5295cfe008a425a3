use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::CtcError;

pub const CTCL_MAGIC: [u8; 4] = *b"CTCL";
pub const CTCL_VERSION: u32 = 1;

/// Tolerance on `sum(exp(row))` for a row to count as a distribution.
pub const ROW_TOLERANCE: f64 = 1e-4;

/// Per-frame natural-log token probabilities, `frames x vocab_size`,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    frames: usize,
    vocab_size: usize,
    values: Vec<f32>,
}

impl PosteriorMatrix {
    /// Checks only the shape; see [`PosteriorMatrix::validate`] for the
    /// distribution check.
    pub fn new(frames: usize, vocab_size: usize, values: Vec<f32>) -> Result<Self, CtcError> {
        if frames == 0 || vocab_size == 0 {
            return Err(CtcError::EmptyMatrix);
        }
        if values.len() != frames * vocab_size {
            return Err(CtcError::ShapeMismatch {
                expected: frames * vocab_size,
                found: values.len(),
            });
        }
        Ok(Self {
            frames,
            vocab_size,
            values,
        })
    }

    /// Builds a matrix from linear-domain probability rows.
    pub fn from_probs(rows: &[Vec<f64>]) -> Result<Self, CtcError> {
        let vocab_size = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != vocab_size) {
            return Err(CtcError::RaggedRows);
        }
        let values = rows
            .iter()
            .flat_map(|r| r.iter().map(|&p| p.ln() as f32))
            .collect();
        Self::new(rows.len(), vocab_size, values)
    }

    /// Applies a log-softmax to each row of raw scores.
    pub fn from_logits(rows: &[Vec<f64>]) -> Result<Self, CtcError> {
        let normalized: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + r.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
                r.iter().map(|x| (x - lse).exp()).collect()
            })
            .collect();
        Self::from_probs(&normalized)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.vocab_size..(t + 1) * self.vocab_size]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Every row must exponentiate-sum to one within [`ROW_TOLERANCE`] and
    /// contain no NaN.
    pub fn validate(&self) -> Result<(), CtcError> {
        for t in 0..self.frames {
            let row = self.row(t);
            if row.iter().any(|x| x.is_nan() || *x == f32::INFINITY) {
                return Err(CtcError::NotNormalized {
                    row: t,
                    sum: f64::NAN,
                });
            }
            let sum: f64 = row.iter().map(|&x| (x as f64).exp()).sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(CtcError::NotNormalized { row: t, sum });
            }
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(&CTCL_MAGIC)?;
        out.write_all(&CTCL_VERSION.to_le_bytes())?;
        out.write_all(&(self.frames as u32).to_le_bytes())?;
        out.write_all(&(self.vocab_size as u32).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CtcError> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CtcError> {
        if bytes.len() < 4 || bytes[..4] != CTCL_MAGIC {
            return Err(CtcError::BadMagic);
        }
        if bytes.len() < 16 {
            return Err(CtcError::Truncated);
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != CTCL_VERSION {
            return Err(CtcError::VersionMismatch(version));
        }
        let frames = word(8) as usize;
        let vocab_size = word(12) as usize;
        let body = &bytes[16..];
        let expected = frames
            .checked_mul(vocab_size)
            .and_then(|n| n.checked_mul(4))
            .ok_or(CtcError::Truncated)?;
        if body.len() < expected {
            return Err(CtcError::Truncated);
        }
        if body.len() > expected {
            return Err(CtcError::TrailingBytes);
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(frames, vocab_size, values)
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self, CtcError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::decode(&bytes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CtcError> {
        Self::decode(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ctcl_round_trip() {
        let m = PosteriorMatrix::from_probs(&[vec![0.5, 0.25, 0.25], vec![0.1, 0.1, 0.8]]).unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CTCL");
        assert_eq!(buf.len(), 16 + 6 * 4);
        assert_eq!(PosteriorMatrix::decode(&buf).unwrap(), m);
        m.validate().unwrap();
    }

    #[test]
    fn ctcl_errors() {
        let m = PosteriorMatrix::from_probs(&[vec![0.5, 0.5]]).unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert!(matches!(
            PosteriorMatrix::decode(b"XXXX"),
            Err(CtcError::BadMagic)
        ));
        assert!(matches!(
            PosteriorMatrix::decode(&buf[..buf.len() - 1]),
            Err(CtcError::Truncated)
        ));
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(
            PosteriorMatrix::decode(&v2),
            Err(CtcError::VersionMismatch(2))
        ));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(
            PosteriorMatrix::decode(&extra),
            Err(CtcError::TrailingBytes)
        ));
    }

    #[test]
    fn validation() {
        let bad = PosteriorMatrix::from_probs(&[vec![0.5, 0.5], vec![0.5, 0.4]]).unwrap();
        assert!(matches!(
            bad.validate(),
            Err(CtcError::NotNormalized { row: 1, .. })
        ));
        assert!(matches!(
            PosteriorMatrix::new(2, 2, vec![0.0; 3]),
            Err(CtcError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            PosteriorMatrix::new(0, 2, vec![]),
            Err(CtcError::EmptyMatrix)
        ));
        let soft = PosteriorMatrix::from_logits(&[vec![1.0, 2.0, 3.0]]).unwrap();
        soft.validate().unwrap();
    }
}
