use std::path::Path;
use std::process::{Command, Output};

fn ctclm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctclm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_log(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn identical_refs_and_hyps_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs.jsonl");
    std::fs::write(
        &refs,
        "{\"id\":\"a\",\"text\":\"halo dunia\"}\n{\"id\":\"b\",\"transcript\":\"Saya pergi!\"}\n",
    )
    .unwrap();
    let out = dir.path().join("wer.csv");
    let o = ctclm(&[
        "eval-wer",
        "--refs",
        s(&refs),
        "--hyps",
        s(&refs),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "WER 0.000%");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        csv,
        "set,utterances,reference_words,substitutions,deletions,insertions,wer\n\
         test,2,4,0,0,0,0.000%\n"
    );
}

#[test]
fn missing_hypothesis_counts_as_deletions() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs.jsonl");
    let hyps = dir.path().join("hyps.jsonl");
    let log = dir.path().join("log.json");
    std::fs::write(
        &refs,
        "{\"id\":\"a\",\"text\":\"halo dunia\"}\n{\"id\":\"b\",\"text\":\"saya pergi ke pasar\"}\n",
    )
    .unwrap();
    std::fs::write(&hyps, "{\"id\":\"a\",\"text\":\"halo dunia\"}\n").unwrap();
    let out = dir.path().join("wer.csv");
    let o = ctclm(&[
        "eval-wer",
        "--refs",
        s(&refs),
        "--hyps",
        s(&hyps),
        "--out",
        s(&out),
        "--run-log",
        s(&log),
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "WER 66.667%");
    assert_eq!(run_log(&log)["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = ctclm(&["decode", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--frobnicate"));
    let o = ctclm(&["lm", "train", "--order", "6", "--in", "x", "--arpa", "y"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ctclm(&[
        "decode",
        "--posteriors",
        "p",
        "--vocab",
        "v",
        "--greedy",
        "--lm",
        "m",
        "--out",
        "o",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one_with_a_run_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.json");
    let vocab = dir.path().join("vocab.txt");
    std::fs::write(&vocab, "a\n|\n[UNK]\n[PAD]\n").unwrap();
    let o = ctclm(&[
        "benchmark",
        "--vocab",
        s(&vocab),
        "--out-dir",
        s(dir.path()),
        "--run-log",
        s(&log),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let log = run_log(&log);
    assert_eq!(log["status"], "error");
    assert!(log["errors"][0].as_str().unwrap().contains("no test sets"));

    let o = ctclm(&[
        "lm",
        "binary",
        "--in",
        "/nonexistent.arpa",
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fused_decoding_beats_greedy_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = |p: &str| dir.path().join(p);
    let ok = |o: Output| assert!(o.status.success(), "{}", stderr(&o));
    ok(ctclm(&[
        "synth",
        "--out",
        s(&d("synth")),
        "--test-sentences",
        "40",
    ]));
    ok(ctclm(&[
        "lm",
        "train",
        "--order",
        "4",
        "--in",
        s(&d("synth/corpus.txt")),
        "--arpa",
        s(&d("lm.arpa")),
    ]));
    ok(ctclm(&[
        "lm",
        "binary",
        "--in",
        s(&d("lm.arpa")),
        "--out",
        s(&d("lm.nglm")),
    ]));

    let wer = |hyps: &Path, name: &str| -> f64 {
        let out = d(&format!("{name}.csv"));
        let o = ctclm(&[
            "eval-wer",
            "--refs",
            s(&d("synth/refs.jsonl")),
            "--hyps",
            s(hyps),
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = stdout(&o);
        text.trim()
            .trim_start_matches("WER ")
            .trim_end_matches('%')
            .parse()
            .unwrap()
    };
    let (posteriors, vocab) = (d("synth/posteriors"), d("synth/vocab.txt"));
    let decode = |extra: &[&str], out: &Path| {
        let mut args = vec![
            "decode",
            "--posteriors",
            s(&posteriors),
            "--vocab",
            s(&vocab),
            "--out",
            s(out),
        ];
        args.extend_from_slice(extra);
        ok(ctclm(&args));
    };
    decode(&["--greedy"], &d("greedy.jsonl"));
    decode(&["--lm", s(&d("lm.nglm"))], &d("fused_bin.jsonl"));
    decode(&["--lm", s(&d("lm.arpa"))], &d("fused_arpa.jsonl"));

    assert_eq!(
        std::fs::read(d("fused_bin.jsonl")).unwrap(),
        std::fs::read(d("fused_arpa.jsonl")).unwrap(),
        "binary and ARPA models decode differently"
    );
    let greedy = wer(&d("greedy.jsonl"), "greedy");
    let fused = wer(&d("fused_bin.jsonl"), "fused");
    assert!(fused < greedy, "fused {fused} vs greedy {greedy}");

    let bench_set = format!(
        "synth={},{}",
        s(&d("synth/posteriors")),
        s(&d("synth/refs.jsonl"))
    );
    let lm_spec = format!("4gram={}", s(&d("lm.nglm")));
    let o = ctclm(&[
        "benchmark",
        "--test-set",
        &bench_set,
        "--test-set",
        "gone=/nonexistent,/nonexistent",
        "--lm",
        &lm_spec,
        "--vocab",
        s(&d("synth/vocab.txt")),
        "--out-dir",
        s(&d("bench")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d("bench/report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "Language Model,synth,gone,AVG WER");
    assert!(lines[1].starts_with("-,"));
    assert!(lines[2].starts_with("4gram,"));
    assert!(lines[1].contains(",–,"));
}

#[test]
fn frames_subcommand_prints_counts() {
    let o = ctclm(&["xlsr", "frames", "--samples", "400", "--samples", "16000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("49"), "{text}");
    let o = ctclm(&["xlsr", "frames", "--samples", "100"]);
    assert_eq!(o.status.code(), Some(1));
}
