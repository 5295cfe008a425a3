use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use ctclm::corpus::{
    duration_totals, duration_warnings, load_manifest, recombine_and_split, validate_audio,
    write_manifest, SplitSpec,
};
use ctclm::ctc::{batch_decode, DecodeConfig, Decoder, PosteriorMatrix};
use ctclm::metrics::{corpus_wer, format_percent, ResultGrid, WerReport};
use ctclm::ngram::{
    count_ngrams, emit_arpa, estimate, load_model, parse_arpa, prune, write_binary, CountOptions,
    NGramModel, Smoothing,
};
use ctclm::synth::{generate, SynthConfig};
use ctclm::textnorm::{build_vocab, has_digits, normalize, NormalizedText, Vocabulary};
use ctclm::xlsr::{frame_count, loss_check, EncoderConfig};

use super::args::*;
use super::Run;

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

fn load_lm(path: &Path) -> Result<NGramModel> {
    load_model(path).with_context(|| format!("loading language model {}", path.display()))
}

pub fn run(command: Command, run: &mut Run) -> Result<()> {
    match command {
        Command::Manifest(ManifestCommand::Validate(a)) => manifest_validate(a, run),
        Command::Manifest(ManifestCommand::Split(a)) => manifest_split(a, run),
        Command::Normalize(a) => normalize_file(a, run),
        Command::BuildVocab(a) => build_vocab_file(a, run),
        Command::Lm(LmCommand::Train(a)) => lm_train(a, run),
        Command::Lm(LmCommand::Binary(a)) => lm_binary(a, run),
        Command::Lm(LmCommand::Query(a)) => lm_query(a, run),
        Command::Decode(a) => decode(a, run),
        Command::EvalWer(a) => eval_wer(a, run),
        Command::Benchmark(a) => benchmark(a, run),
        Command::Xlsr(XlsrCommand::Frames(a)) => xlsr_frames(a, run),
        Command::Xlsr(XlsrCommand::Losscheck(a)) => xlsr_losscheck(a, run),
        Command::Synth(a) => synth(a, run),
    }
}

fn manifest_validate(a: ValidateArgs, run: &mut Run) -> Result<()> {
    let records = load_manifest(&a.input)?;
    let root = a
        .audio_root
        .clone()
        .or_else(|| a.input.parent().map(Path::to_path_buf));
    let report = validate_audio(&records, root.as_deref());
    for finding in &report.flagged {
        for issue in &finding.issues {
            println!("{}\t{}\t{issue}", finding.id, finding.audio_path);
        }
    }
    let totals = duration_totals(&records);
    for w in duration_warnings(&totals, a.duration_tolerance) {
        run.warn(w);
    }
    println!(
        "checked {} files, {} flagged",
        report.checked,
        report.flagged.len()
    );
    run.note("checked", report.checked);
    run.note("flagged", report.flagged.len());
    if let Some(path) = &a.report {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &report)?;
        out.write_all(b"\n")?;
        out.flush()?;
        run.output(path);
    }
    if a.strict && !report.is_clean() {
        bail!("{} files need conversion", report.flagged.len());
    }
    Ok(())
}

fn manifest_split(a: SplitArgs, run: &mut Run) -> Result<()> {
    let train = load_manifest(&a.train)?;
    let validation = load_manifest(&a.validation)?;
    let spec = SplitSpec {
        train_fraction: a.train_fraction,
        seed: run.seed,
    };
    let (train, validation) = recombine_and_split(train, validation, &spec)?;
    for (path, records) in [(&a.out_train, &train), (&a.out_validation, &validation)] {
        let out = create(path)?;
        write_manifest(out, records).with_context(|| format!("writing {}", path.display()))?;
        run.output(path);
    }
    println!("train {} / validation {}", train.len(), validation.len());
    run.note("train", train.len());
    run.note("validation", validation.len());
    Ok(())
}

fn normalize_file(a: NormalizeArgs, run: &mut Run) -> Result<()> {
    let lines = read_lines(&a.input)?;
    let mut out = create(&a.out)?;
    let mut with_digits = 0usize;
    for line in &lines {
        if has_digits(line) {
            with_digits += 1;
        }
        writeln!(out, "{}", normalize(line))?;
    }
    out.flush()?;
    if with_digits > 0 {
        run.warn(format!(
            "{with_digits} lines contained digits, which were dropped"
        ));
    }
    run.note("lines", lines.len());
    run.output(&a.out);
    Ok(())
}

fn build_vocab_file(a: BuildVocabArgs, run: &mut Run) -> Result<()> {
    let transcripts: Vec<NormalizedText> = if a.text {
        read_lines(&a.input)?.iter().map(|l| normalize(l)).collect()
    } else {
        load_manifest(&a.input)?
            .iter()
            .map(|r| r.normalized())
            .collect()
    };
    let vocab = build_vocab(&transcripts)?;
    ensure_parent(&a.out)?;
    vocab.save(&a.out)?;
    println!("{} tokens", vocab.len());
    run.note("tokens", vocab.len());
    run.output(&a.out);
    Ok(())
}

fn lm_train(a: TrainArgs, run: &mut Run) -> Result<()> {
    let mut corpus: Vec<NormalizedText> = read_lines(&a.input)?
        .iter()
        .map(|l| normalize(l))
        .filter(|t| !t.is_empty())
        .collect();
    if let Some(fraction) = a.sample_fraction {
        let keep = ((corpus.len() as f64 * fraction).round() as usize).max(1);
        let mut idx: Vec<usize> = (0..corpus.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(run.seed));
        idx.truncate(keep);
        idx.sort_unstable();
        corpus = idx.into_iter().map(|i| corpus[i].clone()).collect();
        run.note("sampled_sentences", corpus.len());
    }
    let smoothing = match a.smoothing {
        SmoothingArg::Mkn => Smoothing::ModifiedKneserNey,
        SmoothingArg::Addk => Smoothing::AddK(a.k),
    };
    let counts = count_ngrams(
        &corpus,
        a.order as usize,
        CountOptions {
            unk_threshold: a.unk_threshold,
        },
    )?;
    let est = estimate(&counts, smoothing)?;
    for w in &est.warnings {
        run.warn(w.clone());
    }
    let model = match a.prune {
        Some(threshold) => {
            let (pruned, warnings) = prune(&est.model, &counts, threshold);
            for w in warnings {
                run.warn(w);
            }
            pruned
        }
        None => est.model,
    };
    ensure_parent(&a.arpa)?;
    emit_arpa(&model, &a.arpa)?;
    let sizes: Vec<usize> = model.tables().iter().map(|t| t.len()).collect();
    println!("order {} entries {:?}", model.order(), sizes);
    run.note("sentences", corpus.len());
    run.note("entries", sizes);
    if !est.discounts.is_empty() {
        run.note("discounts", est.discounts);
    }
    run.output(&a.arpa);
    Ok(())
}

fn lm_binary(a: BinaryArgs, run: &mut Run) -> Result<()> {
    let model = parse_arpa(&a.input)?;
    ensure_parent(&a.out)?;
    write_binary(&model, &a.out)?;
    run.note("entries", model.entry_count());
    run.output(&a.out);
    Ok(())
}

fn lm_query(a: QueryArgs, run: &mut Run) -> Result<()> {
    let model = load_lm(&a.lm)?;
    let mut sentences = a.sentence.clone();
    if let Some(path) = &a.input {
        sentences.extend(read_lines(path)?);
    }
    let mut text = String::new();
    for s in &sentences {
        let norm = normalize(s);
        let words: Vec<&str> = norm.words().collect();
        let score = model.score_sentence(&words);
        text.push_str(&format!("{score:.6}\t{norm}\n"));
    }
    match &a.out {
        Some(path) => {
            let mut out = create(path)?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
            run.output(path);
        }
        None => print!("{text}"),
    }
    run.note("sentences", sentences.len());
    Ok(())
}

fn decode_config(f: &DecodeFlags) -> DecodeConfig {
    DecodeConfig {
        beam_width: f.beam as usize,
        lm_weight: f.alpha,
        word_bonus: f.beta,
        prune_log_threshold: f.token_floor.ln(),
    }
}

/// `.ctcl` files in `dir`, sorted by utterance id.
fn load_posteriors(dir: &Path) -> Result<Vec<(String, PosteriorMatrix)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ctcl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| anyhow!("non UTF-8 file name {}", p.display()))?
                .to_string();
            let m =
                PosteriorMatrix::load(&p).with_context(|| format!("loading {}", p.display()))?;
            Ok((id, m))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct Hypothesis {
    id: String,
    text: String,
}

/// Decodes every utterance; failures are reported per id.
fn decode_all(
    posteriors: &[(String, PosteriorMatrix)],
    vocab: &Vocabulary,
    decoder: Decoder<'_>,
    run: &mut Run,
) -> Vec<Hypothesis> {
    let items: Vec<(String, &PosteriorMatrix)> =
        posteriors.iter().map(|(id, m)| (id.clone(), m)).collect();
    let mut hyps = Vec::with_capacity(items.len());
    for (id, res) in batch_decode(items, vocab, decoder) {
        match res {
            Ok(text) => hyps.push(Hypothesis {
                id,
                text: text.into_string(),
            }),
            Err(e) => run.fail(format!("{id}: {e}")),
        }
    }
    hyps
}

fn decode(a: DecodeArgs, run: &mut Run) -> Result<()> {
    let vocab = Vocabulary::load(&a.vocab)?;
    let lm = a.lm.as_deref().map(load_lm).transpose()?;
    let decoder = if a.greedy {
        Decoder::Greedy
    } else {
        Decoder::Beam {
            cfg: decode_config(&a.flags),
            lm: lm.as_ref(),
        }
    };
    let posteriors = load_posteriors(&a.posteriors)?;
    let hyps = decode_all(&posteriors, &vocab, decoder, run);
    let mut out = create(&a.out)?;
    for h in &hyps {
        serde_json::to_writer(&mut out, h)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    run.note("utterances", posteriors.len());
    run.note("decoded", hyps.len());
    run.output(&a.out);
    Ok(())
}

#[derive(Debug, Deserialize)]
struct TextLine {
    id: String,
    text: Option<String>,
    transcript: Option<String>,
}

/// `(id, text)` pairs from JSON Lines with a `text` or `transcript` field.
fn load_texts(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TextLine = serde_json::from_str(line)
            .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        let text = rec
            .text
            .or(rec.transcript)
            .ok_or_else(|| anyhow!("{}: line {}: missing field \"text\"", path.display(), i + 1))?;
        out.push((rec.id, text));
    }
    Ok(out)
}

/// Pairs each reference with its hypothesis; missing hypotheses score as
/// empty.
fn score(refs: &[(String, String)], hyps: &[(String, String)], run: &mut Run) -> Result<WerReport> {
    let by_id: std::collections::HashMap<&str, &str> =
        hyps.iter().map(|(i, t)| (i.as_str(), t.as_str())).collect();
    let mut missing = 0usize;
    let triples: Vec<(&str, &str, &str)> = refs
        .iter()
        .map(|(id, r)| {
            let h = by_id.get(id.as_str()).copied().unwrap_or_else(|| {
                missing += 1;
                ""
            });
            (id.as_str(), r.as_str(), h)
        })
        .collect();
    if missing > 0 {
        run.warn(format!("{missing} references have no hypothesis"));
    }
    Ok(corpus_wer(triples)?)
}

fn eval_wer(a: EvalWerArgs, run: &mut Run) -> Result<()> {
    let refs = load_texts(&a.refs)?;
    let hyps = load_texts(&a.hyps)?;
    let report = score(&refs, &hyps, run)?;
    let mut out = create(&a.out)?;
    writeln!(
        out,
        "set,utterances,reference_words,substitutions,deletions,insertions,wer"
    )?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        a.name,
        report.utterances.len(),
        report.reference_words,
        report.edits.substitutions,
        report.edits.deletions,
        report.edits.insertions,
        format_percent(report.wer)
    )?;
    out.flush()?;
    run.output(&a.out);
    if let Some(path) = &a.details {
        let mut out = create(path)?;
        for u in &report.utterances {
            serde_json::to_writer(&mut out, u)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        run.output(path);
    }
    println!("WER {}", format_percent(report.wer));
    run.note("wer", report.wer);
    run.note("reference_words", report.reference_words);
    Ok(())
}

fn split_spec<'a>(spec: &'a str, what: &str) -> Result<(&'a str, &'a str)> {
    spec.split_once('=')
        .filter(|(n, v)| !n.is_empty() && !v.is_empty())
        .ok_or_else(|| anyhow!("{what} {spec:?} is not NAME=VALUE"))
}

fn benchmark(a: BenchmarkArgs, run: &mut Run) -> Result<()> {
    if a.test_sets.is_empty() {
        bail!("no test sets given; nothing to benchmark");
    }
    let vocab = Vocabulary::load(&a.vocab)?;
    let mut rows = vec![("-".to_string(), None)];
    for spec in &a.lms {
        let (name, path) = split_spec(spec, "--lm")?;
        match load_lm(Path::new(path)) {
            Ok(m) => rows.push((name.to_string(), Some(m))),
            Err(e) => {
                run.warn(format!("{name}: {e:#}"));
                rows.push((name.to_string(), None::<NGramModel>));
            }
        }
    }
    let lm_missing: Vec<bool> = rows
        .iter()
        .enumerate()
        .map(|(i, (_, m))| i > 0 && m.is_none())
        .collect();

    let mut columns = Vec::new();
    let mut sets = Vec::new();
    for spec in &a.test_sets {
        let (name, rest) = split_spec(spec, "--test-set")?;
        let (dir, refs) = rest
            .split_once(',')
            .ok_or_else(|| anyhow!("--test-set {spec:?} is not NAME=POSTERIOR_DIR,REFS"))?;
        columns.push(name.to_string());
        let loaded =
            load_posteriors(Path::new(dir)).and_then(|p| Ok((p, load_texts(Path::new(refs))?)));
        match loaded {
            Ok(data) => sets.push((name.to_string(), Some(data))),
            Err(e) => {
                run.warn(format!("{name}: {e:#}"));
                sets.push((name.to_string(), None));
            }
        }
    }

    let mut grid = ResultGrid::with_axes(rows.iter().map(|(n, _)| n.clone()), columns);
    let cfg = decode_config(&a.flags);
    for (set_name, data) in &sets {
        let Some((posteriors, refs)) = data else {
            continue;
        };
        for (r, (row_name, lm)) in rows.iter().enumerate() {
            if lm_missing[r] {
                continue;
            }
            let decoder = match (lm, a.baseline) {
                (None, BaselineArg::Greedy) => Decoder::Greedy,
                (lm, _) => Decoder::Beam {
                    cfg,
                    lm: lm.as_ref(),
                },
            };
            let hyps: Vec<(String, String)> = decode_all(posteriors, &vocab, decoder, run)
                .into_iter()
                .map(|h| (h.id, h.text))
                .collect();
            let report = score(refs, &hyps, run)?;
            grid.insert(set_name, row_name, report.wer);
            run.note(&format!("wer/{set_name}/{row_name}"), report.wer);
        }
    }

    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let csv = a.out_dir.join("report.csv");
    let txt = a.out_dir.join("report.txt");
    fs::write(&csv, grid.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    fs::write(&txt, grid.to_text()).with_context(|| format!("writing {}", txt.display()))?;
    print!("{}", grid.to_text());
    run.output(&csv);
    run.output(&txt);
    if grid.is_empty() {
        bail!("no test set could be scored");
    }
    Ok(())
}

fn xlsr_frames(a: FramesArgs, run: &mut Run) -> Result<()> {
    let cfg = EncoderConfig::default();
    let mut results = Vec::new();
    for &n in &a.samples {
        let frames = frame_count(n, &cfg)?;
        println!(
            "samples {n} frames {frames} (hop {} ms, receptive field {} ms)",
            cfg.hop_ms(),
            cfg.receptive_field_ms()
        );
        results.push(json!({ "samples": n, "frames": frames }));
    }
    run.note("frames", results);
    Ok(())
}

fn xlsr_losscheck(a: LosscheckArgs, run: &mut Run) -> Result<()> {
    let results = loss_check(run.seed);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut table = String::new();
    for r in &results {
        table.push_str(&format!(
            "{:width$}  {}  {}\n",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        ));
    }
    print!("{table}");
    if let Some(path) = &a.out {
        let mut out = create(path)?;
        out.write_all(table.as_bytes())?;
        out.flush()?;
        run.output(path);
    }
    run.note("checks", &results);
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    if !failed.is_empty() {
        bail!("failed checks: {}", failed.join(", "));
    }
    Ok(())
}

fn synth(a: SynthArgs, run: &mut Run) -> Result<()> {
    let cfg = SynthConfig {
        lm_sentences: a.lm_sentences,
        test_sentences: a.test_sentences,
        confusion_rate: a.confusion_rate,
        ..SynthConfig::default()
    };
    let set = generate(&cfg, run.seed);
    let corpus = a.out.join("corpus.txt");
    let refs = a.out.join("refs.jsonl");
    let vocab = a.out.join("vocab.txt");
    let post_dir = a.out.join("posteriors");
    fs::create_dir_all(&post_dir).with_context(|| format!("creating {}", post_dir.display()))?;

    let mut out = create(&corpus)?;
    for s in &set.lm_corpus {
        writeln!(out, "{s}")?;
    }
    out.flush()?;
    let mut out = create(&refs)?;
    for (id, text) in &set.test {
        serde_json::to_writer(
            &mut out,
            &Hypothesis {
                id: id.clone(),
                text: text.to_string(),
            },
        )?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    set.vocab.save(&vocab)?;
    for ((id, _), post) in set.test.iter().zip(&set.posteriors) {
        post.save(post_dir.join(format!("{id}.ctcl")))?;
    }
    for p in [&corpus, &refs, &vocab, &post_dir] {
        run.output(p);
    }
    run.note("config", cfg);
    Ok(())
}
