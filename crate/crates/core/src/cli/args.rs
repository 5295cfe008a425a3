use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ctclm",
    version,
    about = "CTC decoding with word n-gram language models"
)]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 53)]
    pub seed: u64,

    /// Write the JSON run log here instead of standard error.
    #[arg(long, global = true, value_name = "PATH")]
    pub run_log: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Manifest validation and splitting.
    #[command(subcommand)]
    Manifest(ManifestCommand),
    /// Normalize a text file line by line.
    Normalize(NormalizeArgs),
    /// Build the character vocabulary from transcripts.
    BuildVocab(BuildVocabArgs),
    /// Train, convert and query n-gram language models.
    #[command(subcommand)]
    Lm(LmCommand),
    /// Decode a directory of posterior matrices.
    Decode(DecodeArgs),
    /// Score hypotheses against references.
    EvalWer(EvalWerArgs),
    /// Decode and score every test set under every LM configuration.
    Benchmark(BenchmarkArgs),
    /// Encoder geometry and loss invariants.
    #[command(subcommand)]
    Xlsr(XlsrCommand),
    /// Write a synthetic corpus, references and noisy posteriors.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum ManifestCommand {
    /// Check every referenced WAV header.
    Validate(ValidateArgs),
    /// Recombine train and validation manifests and re-split them.
    Split(SplitArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long = "in", value_name = "MANIFEST")]
    pub input: PathBuf,
    /// Directory relative audio paths resolve against; defaults to the
    /// manifest's directory.
    #[arg(long)]
    pub audio_root: Option<PathBuf>,
    /// Write the findings as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exit with an error when any file is flagged.
    #[arg(long)]
    pub strict: bool,
    /// Allowed gap, in seconds, between per-source totals and the
    /// reference durations.
    #[arg(long, default_value_t = 60.0)]
    pub duration_tolerance: f64,
}

fn fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not strictly between 0 and 1"))
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, value_name = "MANIFEST")]
    pub train: PathBuf,
    #[arg(long, value_name = "MANIFEST")]
    pub validation: PathBuf,
    #[arg(long, default_value_t = 0.9, value_parser = fraction)]
    pub train_fraction: f64,
    #[arg(long)]
    pub out_train: PathBuf,
    #[arg(long)]
    pub out_validation: PathBuf,
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    /// Manifest (JSON Lines), or plain text with `--text`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Treat the input as one transcript per line.
    #[arg(long)]
    pub text: bool,
}

#[derive(Debug, Subcommand)]
pub enum LmCommand {
    /// Estimate a model from a text corpus and write it as ARPA.
    Train(TrainArgs),
    /// Convert an ARPA file to the binary format.
    Binary(BinaryArgs),
    /// Score sentences.
    Query(QueryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmoothingArg {
    Mkn,
    Addk,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub order: u8,
    #[arg(long, value_enum, default_value_t = SmoothingArg::Mkn)]
    pub smoothing: SmoothingArg,
    /// Pseudo-count for add-k smoothing.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub arpa: PathBuf,
    /// Drop n-grams (order >= 2) seen at most this many times.
    #[arg(long)]
    pub prune: Option<u64>,
    /// Train on a seeded random subset of this fraction of the lines.
    #[arg(long, value_parser = fraction_inclusive)]
    pub sample_fraction: Option<f64>,
    /// Words seen fewer times than this map to <unk>.
    #[arg(long, default_value_t = 1)]
    pub unk_threshold: u64,
}

fn fraction_inclusive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1]"))
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

#[derive(Debug, Args)]
pub struct BinaryArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("sentences").required(true).args(["sentence", "input"])))]
pub struct QueryArgs {
    /// ARPA or binary model.
    #[arg(long)]
    pub lm: PathBuf,
    #[arg(long)]
    pub sentence: Vec<String>,
    /// One sentence per line.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeFlags {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub beam: u64,
    /// Weight on the LM natural-log probability.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Bonus per emitted word.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Skip tokens whose frame probability is below this.
    #[arg(long, default_value_t = 1e-4)]
    pub token_floor: f64,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Directory of `.ctcl` files; the file stem is the utterance id.
    #[arg(long)]
    pub posteriors: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// ARPA or binary model for shallow fusion.
    #[arg(long, conflicts_with = "greedy")]
    pub lm: Option<PathBuf>,
    /// Best-path decoding instead of beam search.
    #[arg(long)]
    pub greedy: bool,
    #[command(flatten)]
    pub flags: DecodeFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalWerArgs {
    /// JSON Lines with `id` and `text` (or `transcript`).
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long)]
    pub hyps: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Name of the set in the report.
    #[arg(long, default_value = "test")]
    pub name: String,
    /// Per-utterance counts as JSON Lines.
    #[arg(long)]
    pub details: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Greedy,
    Beam,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// `NAME=POSTERIOR_DIR,REFS`; repeatable, columns keep this order.
    #[arg(long = "test-set", value_name = "SPEC")]
    pub test_sets: Vec<String>,
    /// `NAME=MODEL`; repeatable, rows keep this order after the no-LM row.
    #[arg(long = "lm", value_name = "SPEC")]
    pub lms: Vec<String>,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Decoder for the row without a language model.
    #[arg(long, value_enum, default_value_t = BaselineArg::Greedy)]
    pub baseline: BaselineArg,
    #[command(flatten)]
    pub flags: DecodeFlags,
    /// Receives report.csv and report.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum XlsrCommand {
    /// Encoder output frames for a number of input samples.
    Frames(FramesArgs),
    /// Run the quantizer and loss invariant suite.
    Losscheck(LosscheckArgs),
}

#[derive(Debug, Args)]
pub struct FramesArgs {
    #[arg(long, required = true)]
    pub samples: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct LosscheckArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub lm_sentences: usize,
    #[arg(long, default_value_t = 100)]
    pub test_sentences: usize,
    #[arg(long, default_value_t = 0.06, value_parser = probability)]
    pub confusion_rate: f64,
}
