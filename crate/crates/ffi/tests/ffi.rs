use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ctclm_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ctclm_last_error()) }
        .to_string_lossy()
        .into_owned()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_string_lossy().into_owned();
    ctclm_string_free(s);
    out
}

unsafe fn vocab(text: &str) -> *mut CtclmVocab {
    let mut v = ptr::null_mut();
    assert_eq!(ctclm_vocab_build(c(text).as_ptr(), &mut v), CtclmStatus::Ok);
    v
}

/// Near one-hot log rows spelling `path`, `_` marking the blank.
unsafe fn one_hot(v: *const CtclmVocab, path: &str, tokens: &[&str]) -> *mut CtclmPosteriors {
    let size = ctclm_vocab_len(v);
    let blank = ctclm_vocab_blank_id(v) as usize;
    let mut values = Vec::new();
    for ch in path.chars() {
        let id = match ch {
            '_' => blank,
            ' ' => tokens.iter().position(|t| *t == "|").unwrap(),
            x => tokens.iter().position(|t| *t == x.to_string()).unwrap(),
        };
        for i in 0..size {
            let p: f64 = if i == id {
                1.0 - 1e-6 * (size - 1) as f64
            } else {
                1e-6
            };
            values.push(p.ln() as f32);
        }
    }
    let mut post = ptr::null_mut();
    let frames = path.chars().count();
    assert_eq!(
        ctclm_posteriors_new(values.as_ptr(), frames, size, &mut post),
        CtclmStatus::Ok
    );
    post
}

fn tokens_of(v: *const CtclmVocab, dir: &Path) -> Vec<String> {
    let path = c(dir.join("vocab.txt").to_str().unwrap());
    assert_eq!(
        unsafe { ctclm_vocab_save(v, path.as_ptr()) },
        CtclmStatus::Ok
    );
    std::fs::read_to_string(dir.join("vocab.txt"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn normalize_and_version() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            ctclm_normalize(c("Halo, Dunia!").as_ptr(), &mut out),
            CtclmStatus::Ok
        );
        assert_eq!(take(out), "halo dunia");
        assert!(!CStr::from_ptr(ctclm_version()).to_bytes().is_empty());
        assert_eq!(
            ctclm_normalize(ptr::null(), &mut out),
            CtclmStatus::NullPointer
        );
        assert!(last_error().contains("raw"));
    }
}

#[test]
fn decode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let v = vocab("halo dunia");
        let tokens = tokens_of(v, dir.path());
        let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let post = one_hot(v, "h_a_l_o_ _d_u_n_i_a_", &refs);
        assert_eq!(ctclm_posteriors_frames(post), 20);

        let mut out = ptr::null_mut();
        assert_eq!(ctclm_decode_greedy(post, v, &mut out), CtclmStatus::Ok);
        assert_eq!(take(out), "halo dunia");
        assert_eq!(
            ctclm_decode_beam(post, v, ptr::null(), ptr::null(), &mut out),
            CtclmStatus::Ok
        );
        assert_eq!(take(out), "halo dunia");

        let path = c(dir.path().join("u.ctcl").to_str().unwrap());
        assert_eq!(ctclm_posteriors_save(post, path.as_ptr()), CtclmStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(
            ctclm_posteriors_load(path.as_ptr(), &mut back),
            CtclmStatus::Ok
        );
        assert_eq!(ctclm_posteriors_vocab_size(back), ctclm_vocab_len(v));

        let mut lm = ptr::null_mut();
        let corpus = c("halo dunia\nhalo dunia\nhalo teman");
        assert_eq!(
            ctclm_lm_train(corpus.as_ptr(), 2, CTCLM_SMOOTHING_MKN, 0.0, &mut lm),
            CtclmStatus::Ok
        );
        let cfg = ctclm_decode_config_default();
        assert_eq!(cfg.beam_width, 100);
        assert_eq!(
            ctclm_decode_beam(back, v, lm, &cfg, &mut out),
            CtclmStatus::Ok
        );
        assert_eq!(take(out), "halo dunia");

        ctclm_lm_free(lm);
        ctclm_posteriors_free(back);
        ctclm_posteriors_free(post);
        ctclm_vocab_free(v);
    }
}

#[test]
fn lm_formats_agree() {
    let dir = tempfile::tempdir().unwrap();
    let arpa = c(dir.path().join("m.arpa").to_str().unwrap());
    let bin = c(dir.path().join("m.nglm").to_str().unwrap());
    unsafe {
        let mut lm = ptr::null_mut();
        let corpus = c("saya pergi ke pasar\nsaya pergi ke sekolah\nkami pergi ke pasar");
        assert_eq!(
            ctclm_lm_train(corpus.as_ptr(), 3, CTCLM_SMOOTHING_ADD_K, 0.5, &mut lm),
            CtclmStatus::Ok
        );
        assert_eq!(ctclm_lm_order(lm), 3);
        assert_eq!(ctclm_lm_write_arpa(lm, arpa.as_ptr()), CtclmStatus::Ok);
        assert_eq!(ctclm_lm_write_binary(lm, bin.as_ptr()), CtclmStatus::Ok);

        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(ctclm_lm_load(arpa.as_ptr(), &mut a), CtclmStatus::Ok);
        assert_eq!(ctclm_lm_load(bin.as_ptr(), &mut b), CtclmStatus::Ok);
        for s in ["saya pergi ke pasar", "kami pergi ke sekolah", "pasar"] {
            let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
            let s = c(s);
            assert_eq!(
                ctclm_lm_score_sentence(lm, s.as_ptr(), &mut x),
                CtclmStatus::Ok
            );
            assert_eq!(
                ctclm_lm_score_sentence(a, s.as_ptr(), &mut y),
                CtclmStatus::Ok
            );
            assert_eq!(
                ctclm_lm_score_sentence(b, s.as_ptr(), &mut z),
                CtclmStatus::Ok
            );
            assert_eq!(x, y);
            assert_eq!(y, z);
        }
        ctclm_lm_free(a);
        ctclm_lm_free(b);
        ctclm_lm_free(lm);
    }
}

#[test]
fn error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.nglm");
    std::fs::write(&junk, b"NGLM\x09\x00\x00\x00").unwrap();
    let junk = c(junk.to_str().unwrap());
    let missing = c(dir.path().join("nope").to_str().unwrap());
    unsafe {
        let mut lm = ptr::null_mut();
        assert_eq!(ctclm_lm_load(junk.as_ptr(), &mut lm), CtclmStatus::Format);
        assert!(last_error().contains("version"), "{}", last_error());
        assert_eq!(ctclm_lm_load(missing.as_ptr(), &mut lm), CtclmStatus::Io);
        assert_eq!(
            ctclm_lm_train(c("a b").as_ptr(), 2, 7, 0.0, &mut lm),
            CtclmStatus::InvalidArgument
        );
        assert_eq!(
            ctclm_lm_train(c("a b").as_ptr(), 9, CTCLM_SMOOTHING_MKN, 0.0, &mut lm),
            CtclmStatus::InvalidArgument
        );
        assert_eq!(
            ctclm_lm_train(c("").as_ptr(), 2, CTCLM_SMOOTHING_MKN, 0.0, &mut lm),
            CtclmStatus::Empty
        );
        assert!(lm.is_null());

        let v = vocab("ab");
        let mut post = ptr::null_mut();
        let halves = [0.5f32.ln(); 2];
        assert_eq!(
            ctclm_posteriors_new(halves.as_ptr(), 1, 2, &mut post),
            CtclmStatus::Ok
        );
        let mut out = ptr::null_mut();
        assert_eq!(ctclm_decode_greedy(post, v, &mut out), CtclmStatus::Shape);
        ctclm_posteriors_free(post);

        let bad = [0.1f32.ln(); 2];
        assert_eq!(
            ctclm_posteriors_new(bad.as_ptr(), 1, 2, &mut post),
            CtclmStatus::Ok
        );
        assert_eq!(
            ctclm_decode_greedy(post, v, &mut out),
            CtclmStatus::NotNormalized
        );
        ctclm_posteriors_free(post);
        assert_eq!(
            ctclm_posteriors_new(bad.as_ptr(), 0, 2, &mut post),
            CtclmStatus::Empty
        );
        assert_eq!(
            ctclm_decode_greedy(ptr::null(), v, &mut out),
            CtclmStatus::NullPointer
        );
        ctclm_vocab_free(v);

        ctclm_vocab_free(ptr::null_mut());
        ctclm_lm_free(ptr::null_mut());
        ctclm_posteriors_free(ptr::null_mut());
        ctclm_string_free(ptr::null_mut());
        assert_eq!(ctclm_vocab_len(ptr::null()), 0);
    }
}

#[test]
fn wer_and_frames() {
    let refs = [c("a b c d"), c("halo dunia")];
    let hyps = [c("a x c"), c("halo dunia")];
    let rp: Vec<*const c_char> = refs.iter().map(|s| s.as_ptr()).collect();
    let hp: Vec<*const c_char> = hyps.iter().map(|s| s.as_ptr()).collect();
    unsafe {
        let mut w = CtclmWer::default();
        assert_eq!(
            ctclm_wer(rp.as_ptr(), hp.as_ptr(), 2, &mut w),
            CtclmStatus::Ok
        );
        assert_eq!((w.substitutions, w.deletions, w.insertions), (1, 1, 0));
        assert_eq!(w.reference_words, 6);
        assert!((w.wer - 2.0 / 6.0).abs() < 1e-12);
        assert_eq!(
            ctclm_wer(rp.as_ptr(), hp.as_ptr(), 0, &mut w),
            CtclmStatus::Empty
        );

        let mut frames = 0usize;
        assert_eq!(ctclm_frame_count(16_000, &mut frames), CtclmStatus::Ok);
        assert_eq!(frames, 49);
        assert_eq!(
            ctclm_frame_count(399, &mut frames),
            CtclmStatus::InvalidArgument
        );
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ctclm.h")
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(header()).unwrap();
    let source =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    assert!(header.contains("typedef struct CtclmLm CtclmLm;"));
    assert!(header.contains("CTCLM_STATUS_NOT_NORMALIZED = 7"));
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "ctclm.h"

int main(void) {
    CtclmVocab *vocab = NULL;
    if (ctclm_vocab_build("ab", &vocab) != CTCLM_STATUS_OK) return 1;
    size_t v = ctclm_vocab_len(vocab);
    uint32_t blank = ctclm_vocab_blank_id(vocab);
    /* tokens: a b | [UNK] [PAD]; path a _ b */
    uint32_t path[3] = {0, blank, 1};
    float values[3 * 8];
    for (size_t t = 0; t < 3; t++)
        for (size_t i = 0; i < v; i++)
            values[t * v + i] = logf(i == path[t] ? 1.0f - 1e-6f * (float)(v - 1) : 1e-6f);
    CtclmPosteriors *post = NULL;
    if (ctclm_posteriors_new(values, 3, v, &post) != CTCLM_STATUS_OK) return 2;
    char *text = NULL;
    if (ctclm_decode_greedy(post, vocab, &text) != CTCLM_STATUS_OK) return 3;
    int ok = strcmp(text, "ab") == 0;
    ctclm_string_free(text);
    CtclmLm *lm = NULL;
    if (ctclm_lm_load("/nonexistent/model.arpa", &lm) != CTCLM_STATUS_IO) return 4;
    if (strlen(ctclm_last_error()) == 0) return 5;
    ctclm_posteriors_free(post);
    ctclm_vocab_free(vocab);
    printf("%s\n", ok ? "ok" : "mismatch");
    return ok ? 0 : 6;
}
"#;

#[test]
fn header_compiles_as_c() {
    if !have_cc() {
        eprintln!("cc not found; skipping");
        return;
    }
    let status = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(header())
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn c_program_links_against_staticlib() {
    // target/<profile>/deps/<test binary> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libctclm_ffi.a");
    if !have_cc() || !lib.exists() {
        eprintln!("cc or {} not available; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke program failed to build");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
