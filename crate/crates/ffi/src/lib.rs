//! C ABI over the `stlab` library.
//!
//! Every fallible function returns a [`StlabStatus`] and writes its result
//! through an out-pointer. On failure, [`stlab_last_error_message`] returns
//! a description of the most recent error on the calling thread. Strings
//! returned by the library are owned by the caller and must be released
//! with [`stlab_string_free`]; handles are released with their `_free`
//! function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use stlab::corpus::{load_manifest, stats, Manifest};
use stlab::decode::{beam_search, default_max_len, greedy};
use stlab::dsp::{cmvn, log_mel, read_wav};
use stlab::model::{checkpoint, vocab::Vocab, ModelState};
use stlab::training::{lr_at_step, HyperParams};
use stlab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlabStatus {
    Ok = 0,
    /// A required pointer argument was null.
    Null = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    Io = 3,
    /// Malformed input data.
    Data = 4,
    Numerical = 5,
    /// An argument was outside its valid range.
    Domain = 6,
    /// The library panicked; the call had no effect on caller-visible state.
    Panic = 7,
}

/// Opaque corpus manifest.
pub struct StlabManifest {
    inner: Manifest,
}

/// Opaque trained model with its vocabulary.
pub struct StlabModel {
    state: ModelState,
    vocab: Vocab,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StlabCorpusStats {
    pub n_utterances: usize,
    pub total_hours: f64,
    pub mean_duration_sec: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(StlabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => StlabStatus::Io,
            Error::Numerical { .. } => StlabStatus::Numerical,
            Error::Domain(_) | Error::Config { .. } | Error::Layout(_) | Error::Capacity(_) => StlabStatus::Domain,
            _ => StlabStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> StlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StlabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            StlabStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(StlabStatus::Null, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(StlabStatus::Utf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn str_array<'a>(p: *const *const c_char, n: usize, what: &str) -> Result<Vec<&'a str>, Failure> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .map(|&s| str_arg(s, what))
        .collect()
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn stlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a TSV manifest. The split is inferred from the file name.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stlab_manifest_load(path: *const c_char, out: *mut *mut StlabManifest) -> StlabStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = load_manifest(path)?;
        put(out, Box::into_raw(Box::new(StlabManifest { inner: m })), "out")
    })
}

/// # Safety
/// `m` must be a live manifest handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stlab_manifest_len(m: *const StlabManifest, out: *mut usize) -> StlabStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("manifest"))?;
        put(out, m.inner.len(), "out")
    })
}

/// # Safety
/// `m` must be a live manifest handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stlab_manifest_stats(m: *const StlabManifest, out: *mut StlabCorpusStats) -> StlabStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("manifest"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = stats(&m.inner)?;
        put(
            out,
            StlabCorpusStats {
                n_utterances: s.n_utterances,
                total_hours: s.total_hours,
                mean_duration_sec: s.mean_duration_sec,
            },
            "out",
        )
    })
}

/// # Safety
/// `m` must be null or a handle from [`stlab_manifest_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stlab_manifest_free(m: *mut StlabManifest) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Corpus BLEU over `n` hypothesis/reference pairs.
///
/// # Safety
/// `hyps` and `refs` must each point to `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn stlab_corpus_bleu(
    hyps: *const *const c_char,
    refs: *const *const c_char,
    n: usize,
    out: *mut f64,
) -> StlabStatus {
    guard(|| {
        let h = str_array(hyps, n, "hyps")?;
        let r = str_array(refs, n, "refs")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, stlab::metrics::corpus_bleu(&h, &r)?.bleu, "out")
    })
}

/// # Safety
/// `hyp` and `reference` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn stlab_sentence_bleu(hyp: *const c_char, reference: *const c_char, out: *mut f64) -> StlabStatus {
    guard(|| {
        let h = str_arg(hyp, "hyp")?;
        let r = str_arg(reference, "reference")?;
        put(out, stlab::metrics::sentence_bleu(h, r), "out")
    })
}

/// Corpus chrF++ over `n` pairs.
///
/// # Safety
/// `hyps` and `refs` must each point to `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn stlab_chrf_pp(
    hyps: *const *const c_char,
    refs: *const *const c_char,
    n: usize,
    out: *mut f64,
) -> StlabStatus {
    guard(|| {
        let h = str_array(hyps, n, "hyps")?;
        let r = str_array(refs, n, "refs")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, stlab::metrics::chrf_pp(&h, &r)?, "out")
    })
}

/// Learning rate at optimizer step `step` (1-based) for linear warmup over
/// `warmup_steps` followed by inverse square-root decay.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stlab_lr_at_step(step: u64, lr_peak: f64, warmup_steps: u64, out: *mut f64) -> StlabStatus {
    guard(|| {
        let hp = HyperParams {
            lr_peak,
            warmup_steps,
            ..HyperParams::default()
        };
        hp.validate()?;
        put(out, lr_at_step(step, &hp), "out")
    })
}

/// Numerals found in `text` as a JSON array of decimal strings, e.g.
/// `["87400000","15"]`. Free the result with [`stlab_string_free`].
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stlab_extract_numerals(text: *const c_char, out: *mut *mut c_char) -> StlabStatus {
    guard(|| {
        let t = str_arg(text, "text")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let values: Vec<String> = stlab::analysis::extract_numerals(t)
            .iter()
            .map(|n| n.value.to_string())
            .collect();
        put(out, c_string(serde_json::to_string(&values).expect("json")), "out")
    })
}

/// Loads a checkpoint written by `stlab train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stlab_model_load(path: *const c_char, out: *mut *mut StlabModel) -> StlabStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (state, vocab) = checkpoint::load(Path::new(path))?;
        put(out, Box::into_raw(Box::new(StlabModel { state, vocab })), "out")
    })
}

/// Translates a 16 kHz mono PCM wav file. A beam of 1 decodes greedily.
/// Free the result with [`stlab_string_free`].
///
/// # Safety
/// `model` must be a live model handle, `wav_path` a NUL-terminated string
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stlab_model_decode_wav(
    model: *const StlabModel,
    wav_path: *const c_char,
    beam: usize,
    out: *mut *mut c_char,
) -> StlabStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let path = str_arg(wav_path, "wav_path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let features = cmvn(&log_mel(&read_wav(path)?)?)?;
        let max_len = default_max_len(m.state.config.memory_len(features.frames()));
        let h = if beam <= 1 {
            greedy(&m.state, &features, max_len)?
        } else {
            beam_search(&m.state, &features, beam, max_len)?
        };
        put(out, c_string(m.vocab.decode(&h.tokens)), "out")
    })
}

/// # Safety
/// `m` must be null or a handle from [`stlab_model_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stlab_model_free(m: *mut StlabModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}
