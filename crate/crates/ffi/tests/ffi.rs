use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use stlab::model::{checkpoint, init, vocab::Vocab, ModelConfig};
use stlab::synth::{generate, SynthSpec};
use stlab_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(stlab_last_error_message()) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { stlab_string_free(p) };
    s
}

#[test]
fn metrics_through_the_abi() {
    let h = [c("the cat sat on the mat")];
    let r = [c("the cat is on the mat")];
    let hp: Vec<*const c_char> = h.iter().map(|s| s.as_ptr()).collect();
    let rp: Vec<*const c_char> = r.iter().map(|s| s.as_ptr()).collect();
    let mut bleu = 0.0;
    let status = unsafe { stlab_corpus_bleu(hp.as_ptr(), rp.as_ptr(), 1, &mut bleu) };
    assert_eq!(status, StlabStatus::Ok);
    assert!((bleu - 37.99178428257963).abs() < 1e-9);

    let mut same = 0.0;
    assert_eq!(unsafe { stlab_corpus_bleu(hp.as_ptr(), hp.as_ptr(), 1, &mut same) }, StlabStatus::Ok);
    assert_eq!(same, 100.0);

    let mut chrf = 0.0;
    assert_eq!(unsafe { stlab_chrf_pp(hp.as_ptr(), hp.as_ptr(), 1, &mut chrf) }, StlabStatus::Ok);
    assert_eq!(chrf, 100.0);

    let mut sb = 0.0;
    assert_eq!(unsafe { stlab_sentence_bleu(h[0].as_ptr(), r[0].as_ptr(), &mut sb) }, StlabStatus::Ok);
    assert!((sb - bleu).abs() < 1e-12);

    let mut zero = 1.0;
    assert_eq!(unsafe { stlab_corpus_bleu(ptr::null(), ptr::null(), 0, &mut zero) }, StlabStatus::Ok);
    assert_eq!(zero, 0.0);
}

#[test]
fn schedule_and_numerals() {
    let mut lr = 0.0;
    assert_eq!(unsafe { stlab_lr_at_step(250, 1e-5, 250, &mut lr) }, StlabStatus::Ok);
    assert_eq!(lr, 1e-5);
    assert_eq!(unsafe { stlab_lr_at_step(1, -1.0, 250, &mut lr) }, StlabStatus::Domain);
    assert!(last_error().contains("lr_peak"));

    let mut out = ptr::null_mut();
    let t = c("8 crores 74 lakhs and पन्द्रह");
    assert_eq!(unsafe { stlab_extract_numerals(t.as_ptr(), &mut out) }, StlabStatus::Ok);
    assert_eq!(take_string(out), r#"["87400000","15"]"#);
}

#[test]
fn argument_errors() {
    let mut x = 0.0;
    assert_eq!(unsafe { stlab_sentence_bleu(ptr::null(), ptr::null(), &mut x) }, StlabStatus::Null);
    assert!(last_error().contains("hyp"));
    let bad = [0xffu8, 0xfe, 0];
    let good = c("a");
    assert_eq!(
        unsafe { stlab_sentence_bleu(bad.as_ptr().cast(), good.as_ptr(), &mut x) },
        StlabStatus::Utf8
    );
    assert_eq!(unsafe { stlab_sentence_bleu(good.as_ptr(), good.as_ptr(), ptr::null_mut()) }, StlabStatus::Null);
    let hp = [good.as_ptr()];
    assert_eq!(unsafe { stlab_corpus_bleu(hp.as_ptr(), ptr::null(), 1, &mut x) }, StlabStatus::Null);
    unsafe {
        stlab_string_free(ptr::null_mut());
        stlab_manifest_free(ptr::null_mut());
        stlab_model_free(ptr::null_mut());
    }
}

#[test]
fn manifest_and_model_handles() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate(dir.path(), &SynthSpec { n_utterances: 3, ..SynthSpec::default() }).unwrap();
    let mpath = dir.path().join("train.tsv");
    m.save(&mpath).unwrap();

    let p = c(mpath.to_str().unwrap());
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { stlab_manifest_load(p.as_ptr(), &mut h) }, StlabStatus::Ok);
    let mut n = 0usize;
    assert_eq!(unsafe { stlab_manifest_len(h, &mut n) }, StlabStatus::Ok);
    assert_eq!(n, 3);
    let mut s = StlabCorpusStats::default();
    assert_eq!(unsafe { stlab_manifest_stats(h, &mut s) }, StlabStatus::Ok);
    assert_eq!(s.n_utterances, 3);
    let total: f64 = m.utterances.iter().map(|u| u.duration_sec).sum();
    assert!((s.total_hours - total / 3600.0).abs() < 1e-12);
    unsafe { stlab_manifest_free(h) };

    let missing = c(dir.path().join("nope.tsv").to_str().unwrap());
    let mut h2 = ptr::null_mut();
    assert_eq!(unsafe { stlab_manifest_load(missing.as_ptr(), &mut h2) }, StlabStatus::Io);
    assert!(h2.is_null());
    let garbage = dir.path().join("bad.tsv");
    std::fs::write(&garbage, "not a manifest\n").unwrap();
    let g = c(garbage.to_str().unwrap());
    assert_eq!(unsafe { stlab_manifest_load(g.as_ptr(), &mut h2) }, StlabStatus::Data);

    let vocab = Vocab::from_chars("घरपानीदसआमजल ".chars()).unwrap();
    let cfg = ModelConfig {
        d_model: 16,
        n_heads: 2,
        enc_layers: 1,
        dec_layers: 1,
        ff_dim: 16,
        vocab_size: vocab.size(),
        ..ModelConfig::default()
    };
    let state = init(&cfg, 3).unwrap();
    let ckpt = dir.path().join("model.ckpt");
    checkpoint::save(&state, &vocab, &ckpt).unwrap();
    let cp = c(ckpt.to_str().unwrap());
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { stlab_model_load(cp.as_ptr(), &mut model) }, StlabStatus::Ok);
    let wav = c(dir.path().join(&m.utterances[0].audio_path).to_str().unwrap());
    let mut greedy = ptr::null_mut();
    let mut beam1 = ptr::null_mut();
    assert_eq!(unsafe { stlab_model_decode_wav(model, wav.as_ptr(), 0, &mut greedy) }, StlabStatus::Ok);
    assert_eq!(unsafe { stlab_model_decode_wav(model, wav.as_ptr(), 1, &mut beam1) }, StlabStatus::Ok);
    assert_eq!(take_string(greedy), take_string(beam1));
    let mut beam4 = ptr::null_mut();
    assert_eq!(unsafe { stlab_model_decode_wav(model, wav.as_ptr(), 4, &mut beam4) }, StlabStatus::Ok);
    let text = take_string(beam4);
    assert!(text.chars().all(|ch| vocab.chars().contains(&ch) || ch == '\u{FFFD}'));
    assert_eq!(unsafe { stlab_model_decode_wav(model, missing.as_ptr(), 1, &mut beam4) }, StlabStatus::Io);
    unsafe { stlab_model_free(model) };

    std::fs::write(&ckpt, b"STLBCKPT broken").unwrap();
    assert_eq!(unsafe { stlab_model_load(cp.as_ptr(), &mut model) }, StlabStatus::Data);
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/stlab.h")).unwrap();
    for name in [
        "stlab_last_error_message",
        "stlab_string_free",
        "stlab_manifest_load",
        "stlab_manifest_len",
        "stlab_manifest_stats",
        "stlab_manifest_free",
        "stlab_corpus_bleu",
        "stlab_sentence_bleu",
        "stlab_chrf_pp",
        "stlab_lr_at_step",
        "stlab_extract_numerals",
        "stlab_model_load",
        "stlab_model_decode_wav",
        "stlab_model_free",
        "typedef struct StlabManifest StlabManifest;",
        "typedef struct StlabModel StlabModel;",
        "STLAB_STATUS_PANIC = 7",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

/// Compiles a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib_dir = deps.parent().unwrap().to_path_buf();
    let lib = lib_dir.join("libstlab_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let manifest_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .arg(manifest_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "{cc} failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), "100.000000 100.000000 1.000e-05");
}
