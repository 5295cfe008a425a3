//! Speech corpus manifests, audio header validation and the train/validation
//! recombination split.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textnorm::{normalize, NormalizedText};

/// Sample rate every record must have after validation.
pub const TARGET_SAMPLE_RATE_HZ: u32 = 16_000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing field {field:?}")]
    MissingField { field: &'static str, line: usize },
    #[error("cannot split an empty set of records")]
    EmptyInput,
    #[error("train fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("record id {0:?} occurs more than once")]
    DuplicateId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    TitmlIdn,
    MagicData,
    CommonVoice,
    Other,
}

impl Source {
    /// Total duration in seconds reported for the public datasets.
    pub fn reference_duration_s(self) -> Option<f64> {
        match self {
            Source::TitmlIdn => Some((14 * 3600 + 31 * 60) as f64),
            Source::MagicData => Some((3 * 3600 + 33 * 60) as f64),
            Source::CommonVoice => Some((6 * 3600 + 14 * 60 + 1) as f64),
            Source::Other => None,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::TitmlIdn => "titml_idn",
            Source::MagicData => "magic_data",
            Source::CommonVoice => "common_voice",
            Source::Other => "other",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Train,
    Validation,
    Test,
}

/// One line of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub audio_path: String,
    #[serde(rename = "transcript")]
    pub transcript_raw: String,
    #[serde(skip)]
    pub transcript_norm: NormalizedText,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub speaker_id: String,
    pub source: Source,
    pub subset: Subset,
}

impl UtteranceRecord {
    pub fn normalized(&self) -> NormalizedText {
        normalize(&self.transcript_raw)
    }
}

const MANIFEST_FIELDS: [&str; 8] = [
    "id",
    "audio_path",
    "transcript",
    "duration_s",
    "sample_rate_hz",
    "speaker_id",
    "source",
    "subset",
];

/// Parses one JSON manifest line. `line` is 1-based and only used in errors.
pub fn parse_record(text: &str, line: usize) -> Result<UtteranceRecord, CorpusError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CorpusError::Parse {
        line,
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| CorpusError::Parse {
        line,
        message: "expected a JSON object".into(),
    })?;
    if let Some(field) = MANIFEST_FIELDS.iter().find(|f| !obj.contains_key(**f)) {
        return Err(CorpusError::MissingField { field, line });
    }
    let mut rec: UtteranceRecord =
        serde_json::from_value(value).map_err(|e| CorpusError::Parse {
            line,
            message: e.to_string(),
        })?;
    if !(rec.duration_s >= 0.0) {
        return Err(CorpusError::Parse {
            line,
            message: format!("duration_s must be nonnegative, got {}", rec.duration_s),
        });
    }
    if rec.sample_rate_hz == 0 {
        return Err(CorpusError::Parse {
            line,
            message: "sample_rate_hz must be positive".into(),
        });
    }
    rec.transcript_norm = rec.normalized();
    Ok(rec)
}

/// Reads a JSON Lines manifest. Blank lines are skipped; records keep file
/// order.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(std::fs::File::open(path).map_err(io_err)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line, i + 1)?);
    }
    Ok(records)
}

pub fn write_manifest<W: std::io::Write>(
    mut out: W,
    records: &[UtteranceRecord],
) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AudioIssue {
    /// File header rate differs from 16 kHz.
    NeedsResample {
        found_hz: u32,
    },
    NotMono {
        channels: u16,
    },
    /// Anything other than 16-bit integer PCM.
    UnsupportedEncoding {
        bits_per_sample: u16,
        float: bool,
    },
    /// The manifest disagrees with the file header.
    DeclaredRateMismatch {
        declared_hz: u32,
        header_hz: u32,
    },
    Io {
        message: String,
    },
}

impl fmt::Display for AudioIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AudioIssue::NeedsResample { found_hz } => {
                write!(
                    f,
                    "needs resample to {TARGET_SAMPLE_RATE_HZ} (found {found_hz} Hz)"
                )
            }
            AudioIssue::NotMono { channels } => write!(f, "not mono ({channels} channels)"),
            AudioIssue::UnsupportedEncoding {
                bits_per_sample,
                float,
            } => write!(
                f,
                "unsupported encoding ({bits_per_sample}-bit {})",
                if *float { "float" } else { "int" }
            ),
            AudioIssue::DeclaredRateMismatch {
                declared_hz,
                header_hz,
            } => write!(
                f,
                "manifest says {declared_hz} Hz but header says {header_hz} Hz"
            ),
            AudioIssue::Io { message } => write!(f, "io error: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AudioFinding {
    pub id: String,
    pub audio_path: String,
    pub issues: Vec<AudioIssue>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checked: usize,
    pub flagged: Vec<AudioFinding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.flagged.is_empty()
    }
}

fn check_record(rec: &UtteranceRecord, base: Option<&Path>) -> Vec<AudioIssue> {
    let mut issues = Vec::new();
    let path = match base {
        Some(dir) if Path::new(&rec.audio_path).is_relative() => dir.join(&rec.audio_path),
        _ => PathBuf::from(&rec.audio_path),
    };
    match hound::WavReader::open(&path) {
        Ok(reader) => {
            let spec = reader.spec();
            if spec.sample_rate != TARGET_SAMPLE_RATE_HZ {
                issues.push(AudioIssue::NeedsResample {
                    found_hz: spec.sample_rate,
                });
            }
            if spec.channels != 1 {
                issues.push(AudioIssue::NotMono {
                    channels: spec.channels,
                });
            }
            let float = spec.sample_format == hound::SampleFormat::Float;
            if float || spec.bits_per_sample != 16 {
                issues.push(AudioIssue::UnsupportedEncoding {
                    bits_per_sample: spec.bits_per_sample,
                    float,
                });
            }
            if rec.sample_rate_hz != spec.sample_rate {
                issues.push(AudioIssue::DeclaredRateMismatch {
                    declared_hz: rec.sample_rate_hz,
                    header_hz: spec.sample_rate,
                });
            }
        }
        Err(e) => issues.push(AudioIssue::Io {
            message: e.to_string(),
        }),
    }
    issues
}

/// Reads each referenced WAV header and reports records that are not 16 kHz
/// mono 16-bit PCM. Audio is never modified. Relative audio paths resolve
/// against `base` when given.
pub fn validate_audio(records: &[UtteranceRecord], base: Option<&Path>) -> ValidationReport {
    let flagged = records
        .par_iter()
        .map(|rec| (rec, check_record(rec, base)))
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|(_, issues)| !issues.is_empty())
        .map(|(rec, issues)| AudioFinding {
            id: rec.id.clone(),
            audio_path: rec.audio_path.clone(),
            issues,
        })
        .collect();
    ValidationReport {
        checked: records.len(),
        flagged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.9,
            seed: 53,
        }
    }
}

impl SplitSpec {
    /// `floor((1 - train_fraction) * n)`, tolerant of binary rounding so that
    /// 0.1 * 10 counts as 1.
    pub fn validation_count(&self, n: usize) -> usize {
        let raw = (1.0 - self.train_fraction) * n as f64;
        (raw + 1e-9).floor() as usize
    }
}

/// Merges the two subsets, shuffles them with a seeded Fisher-Yates pass
/// over id-sorted records, and cuts off the validation share from the end.
pub fn recombine_and_split(
    train: Vec<UtteranceRecord>,
    validation: Vec<UtteranceRecord>,
    spec: &SplitSpec,
) -> Result<(Vec<UtteranceRecord>, Vec<UtteranceRecord>), CorpusError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(CorpusError::BadFraction(spec.train_fraction));
    }
    let mut union = train;
    union.extend(validation);
    if union.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let mut seen = HashSet::with_capacity(union.len());
    for rec in &union {
        if !seen.insert(rec.id.as_str()) {
            return Err(CorpusError::DuplicateId(rec.id.clone()));
        }
    }
    union.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    union.shuffle(&mut rng);

    let n_val = spec.validation_count(union.len());
    let val = union.split_off(union.len() - n_val);
    let mut train = union;
    for rec in &mut train {
        rec.subset = Subset::Train;
    }
    let mut val = val;
    for rec in &mut val {
        rec.subset = Subset::Validation;
    }
    Ok((train, val))
}

/// Sum of `duration_s` per source.
pub fn duration_totals(records: &[UtteranceRecord]) -> BTreeMap<Source, f64> {
    let mut totals = BTreeMap::new();
    for rec in records {
        *totals.entry(rec.source).or_insert(0.0) += rec.duration_s;
    }
    totals
}

/// Warnings for sources whose total duration differs from the reference
/// figure by more than `tolerance_s`.
pub fn duration_warnings(totals: &BTreeMap<Source, f64>, tolerance_s: f64) -> Vec<String> {
    totals
        .iter()
        .filter_map(|(src, &secs)| {
            let reference = src.reference_duration_s()?;
            ((secs - reference).abs() > tolerance_s).then(|| {
                format!(
                    "{src}: total {} differs from reference {}",
                    format_hms(secs),
                    format_hms(reference)
                )
            })
        })
        .collect()
}

pub fn format_hms(secs: f64) -> String {
    let total = secs.round() as u64;
    format!(
        "{}h{:02}m{:02}s",
        total / 3600,
        (total / 60) % 60,
        total % 60
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    pub(crate) fn record(id: &str, subset: Subset) -> UtteranceRecord {
        UtteranceRecord {
            id: id.to_string(),
            audio_path: format!("{id}.wav"),
            transcript_raw: "halo".into(),
            transcript_norm: normalize("halo"),
            duration_s: 1.0,
            sample_rate_hz: 16_000,
            speaker_id: "s".into(),
            source: Source::CommonVoice,
            subset,
        }
    }

    fn line(id: &str) -> String {
        format!(
            r#"{{"id":"{id}","audio_path":"{id}.wav","transcript":"Halo, Dunia!","duration_s":1.5,"sample_rate_hz":16000,"speaker_id":"G0004","source":"magic_data","subset":"train"}}"#
        )
    }

    fn write_wav(path: &Path, rate: u32, channels: u16) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for i in 0..(rate / 10) * channels as u32 {
            w.write_sample((i % 100) as i16).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn manifest_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "{}\n{}", line("b"), line("a")).unwrap();
        let recs = load_manifest(&path).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].id, "b");
        assert_eq!(recs[1].id, "a");
        assert_eq!(recs[0].transcript_norm.as_str(), "halo dunia");
        assert_eq!(recs[0].source, Source::MagicData);
    }

    #[test]
    fn manifest_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        std::fs::File::create(&path).unwrap();
        assert!(load_manifest(&path).unwrap().is_empty());
    }

    #[test]
    fn manifest_missing_field_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let bad = line("c").replace(r#""audio_path":"c.wav","#, "");
        std::fs::write(&path, format!("{}\n{}\n", line("a"), bad)).unwrap();
        match load_manifest(&path) {
            Err(CorpusError::MissingField { field, line }) => {
                assert_eq!(field, "audio_path");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_malformed_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        std::fs::write(&path, format!("{}\n{{not json\n", line("a"))).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(CorpusError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn audio_validation_flags_rates_and_io() {
        let dir = tempfile::tempdir().unwrap();
        write_wav(&dir.path().join("ok.wav"), 16_000, 1);
        write_wav(&dir.path().join("cv.wav"), 48_000, 1);
        write_wav(&dir.path().join("st.wav"), 16_000, 2);
        let mut recs = vec![
            record("ok", Subset::Train),
            record("cv", Subset::Train),
            record("st", Subset::Train),
            record("gone", Subset::Train),
        ];
        recs[1].sample_rate_hz = 48_000;
        let report = validate_audio(&recs, Some(dir.path()));
        assert_eq!(report.checked, 4);
        let ids: Vec<_> = report.flagged.iter().map(|f| f.id.as_str()).collect();
        assert_eq!(ids, ["cv", "st", "gone"]);
        assert_eq!(
            report.flagged[0].issues,
            vec![AudioIssue::NeedsResample { found_hz: 48_000 }]
        );
        assert!(report.flagged[0].issues[0]
            .to_string()
            .contains("needs resample to 16000"));
        assert_eq!(
            report.flagged[1].issues,
            vec![AudioIssue::NotMono { channels: 2 }]
        );
        assert!(matches!(report.flagged[2].issues[0], AudioIssue::Io { .. }));
    }

    #[test]
    fn split_small() {
        let recs: Vec<_> = (0..10)
            .map(|i| record(&format!("u{i}"), Subset::Train))
            .collect();
        let (tr, va) = recombine_and_split(recs, vec![], &SplitSpec::default()).unwrap();
        assert_eq!((tr.len(), va.len()), (9, 1));
        assert!(va.iter().all(|r| r.subset == Subset::Validation));
    }

    #[test]
    fn split_rejects_empty_and_duplicates() {
        assert!(matches!(
            recombine_and_split(vec![], vec![], &SplitSpec::default()),
            Err(CorpusError::EmptyInput)
        ));
        let dup = vec![record("x", Subset::Train)];
        assert!(matches!(
            recombine_and_split(dup.clone(), dup, &SplitSpec::default()),
            Err(CorpusError::DuplicateId(_))
        ));
    }

    #[test]
    fn split_is_order_independent() {
        let recs: Vec<_> = (0..50)
            .map(|i| record(&format!("u{i:02}"), Subset::Train))
            .collect();
        let mut rev = recs.clone();
        rev.reverse();
        let spec = SplitSpec {
            train_fraction: 0.8,
            seed: 7,
        };
        let a = recombine_and_split(recs, vec![], &spec).unwrap();
        let b = recombine_and_split(rev[..20].to_vec(), rev[20..].to_vec(), &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duration_warning_against_reference() {
        let mut recs = vec![record("a", Subset::Train)];
        recs[0].duration_s = (6 * 3600 + 14 * 60 + 1) as f64;
        let totals = duration_totals(&recs);
        assert!(duration_warnings(&totals, 1.0).is_empty());
        recs[0].duration_s = 10.0;
        let warn = duration_warnings(&duration_totals(&recs), 1.0);
        assert_eq!(warn.len(), 1);
        assert!(warn[0].contains("6h14m01s"));
    }
}
