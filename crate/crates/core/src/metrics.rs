//! Corpus BLEU and chrF++ compatible with the sacrebleu defaults
//! (13a tokenization, exponential smoothing, chrF++ with β = 2).

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_NGRAM_ORDER: usize = 4;
pub const CHRF_CHAR_ORDER: usize = 6;
pub const CHRF_WORD_ORDER: usize = 2;
pub const CHRF_BETA: f64 = 2.0;

/// Log used when averaging precisions; zero maps to a huge negative value
/// instead of -inf, as the reference scorer does.
fn floor_log(x: f64) -> f64 {
    if x == 0.0 {
        -9_999_999_999.0
    } else {
        x.ln()
    }
}

fn rules() -> &'static [(Regex, &'static str); 4] {
    static RULES: OnceLock<[(Regex, &'static str); 4]> = OnceLock::new();
    RULES.get_or_init(|| {
        [
            (Regex::new(r"([\{-~\[-` -&\(-\+:-@/])").unwrap(), " $1 "),
            (Regex::new(r"([^0-9])([\.,])").unwrap(), "$1 $2 "),
            (Regex::new(r"([\.,])([^0-9])").unwrap(), " $1 $2"),
            (Regex::new(r"([0-9])(-)").unwrap(), "$1 $2 "),
        ]
    })
}

/// mteval-v13a tokenization.
pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line = text.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, rep) in rules() {
        line = re.replace_all(&line, *rep).into_owned();
    }
    line.split_whitespace().map(str::to_string).collect()
}

fn count<T: Eq + Hash>(items: impl Iterator<Item = T>) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for it in items {
        *m.entry(it).or_insert(0) += 1;
    }
    m
}

fn ngrams<T: Clone + Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    if tokens.len() < n {
        return HashMap::new();
    }
    count(tokens.windows(n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub bleu: f64,
    /// Smoothed precisions as fractions.
    pub ngram_precisions: [f64; MAX_NGRAM_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub correct: [usize; MAX_NGRAM_ORDER],
    pub total: [usize; MAX_NGRAM_ORDER],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub bleu: f64,
    pub ngram_precisions: [f64; MAX_NGRAM_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub chrf_pp: f64,
}

fn check_pairing<A, B>(hyps: &[A], refs: &[B]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::Pairing {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    Ok(())
}

pub fn corpus_bleu<S: AsRef<str>, R: AsRef<str>>(hyps: &[S], refs: &[R]) -> Result<BleuScore> {
    check_pairing(hyps, refs)?;
    let mut correct = [0usize; MAX_NGRAM_ORDER];
    let mut total = [0usize; MAX_NGRAM_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hyps.iter().zip(refs) {
        let h = tokenize_13a(h.as_ref().trim_end());
        let r = tokenize_13a(r.as_ref().trim_end());
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_NGRAM_ORDER {
            let rc = ngrams(&r, n);
            for (g, c) in ngrams(&h, n) {
                total[n - 1] += c;
                correct[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
            }
        }
    }
    Ok(bleu_from_stats(correct, total, hyp_len, ref_len))
}

pub fn bleu_from_stats(
    correct: [usize; MAX_NGRAM_ORDER],
    total: [usize; MAX_NGRAM_ORDER],
    hyp_len: usize,
    ref_len: usize,
) -> BleuScore {
    let brevity_penalty = if hyp_len < ref_len {
        if hyp_len > 0 {
            (1.0 - ref_len as f64 / hyp_len as f64).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    let mut precisions = [0.0; MAX_NGRAM_ORDER];
    let mut bleu = 0.0;
    if correct.iter().any(|&c| c > 0) {
        let mut smooth = 1.0;
        for n in 0..MAX_NGRAM_ORDER {
            if total[n] == 0 {
                break;
            }
            precisions[n] = if correct[n] == 0 {
                smooth *= 2.0;
                1.0 / (smooth * total[n] as f64)
            } else {
                correct[n] as f64 / total[n] as f64
            };
        }
        let mean_log = precisions.iter().map(|&p| floor_log(p)).sum::<f64>() / MAX_NGRAM_ORDER as f64;
        // averaging logs of fractions keeps a perfect match at exactly 100
        bleu = 100.0 * brevity_penalty * mean_log.exp();
    }
    BleuScore {
        bleu,
        ngram_precisions: precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
        correct,
        total,
    }
}

/// BLEU of a single pair, with the corpus-level smoothing.
pub fn sentence_bleu(hyp: &str, reference: &str) -> f64 {
    corpus_bleu(&[hyp], &[reference]).expect("one pair").bleu
}

const CHRF_PUNCTS: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// Whitespace split with one leading or trailing punctuation mark peeled off
/// each word.
fn chrf_words(sent: &str) -> Vec<String> {
    let mut out = Vec::new();
    for w in sent.split_whitespace() {
        let chars: Vec<char> = w.chars().collect();
        if chars.len() == 1 {
            out.push(w.to_string());
        } else if CHRF_PUNCTS.contains(chars[chars.len() - 1]) {
            out.push(chars[..chars.len() - 1].iter().collect());
            out.push(chars[chars.len() - 1].to_string());
        } else if CHRF_PUNCTS.contains(chars[0]) {
            out.push(chars[0].to_string());
            out.push(chars[1..].iter().collect());
        } else {
            out.push(w.to_string());
        }
    }
    out
}

/// `[hyp, ref, match]` per order: character orders first, then word orders.
fn chrf_stats(hyp: &str, reference: &str) -> Vec<[usize; 3]> {
    fn stats<T: Clone + Eq + Hash>(h: &[T], r: &[T], n: usize) -> [usize; 3] {
        let (hg, rg) = (ngrams(h, n), ngrams(r, n));
        let hyp_count: usize = hg.values().sum();
        let matched = hg.iter().map(|(g, c)| (*c).min(rg.get(g).copied().unwrap_or(0))).sum();
        [if rg.is_empty() { 0 } else { hyp_count }, rg.values().sum(), matched]
    }
    let hc: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let rc: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let hw = chrf_words(hyp);
    let rw = chrf_words(reference);
    (1..=CHRF_CHAR_ORDER)
        .map(|n| stats(&hc, &rc, n))
        .chain((1..=CHRF_WORD_ORDER).map(|n| stats(&hw, &rw, n)))
        .collect()
}

fn chrf_from_stats(stats: &[[usize; 3]]) -> f64 {
    let (mut p, mut r, mut k) = (0.0, 0.0, 0);
    for &[h, rf, m] in stats {
        if h > 0 && rf > 0 {
            p += m as f64 / h as f64;
            r += m as f64 / rf as f64;
            k += 1;
        }
    }
    if k == 0 {
        return 0.0;
    }
    let (p, r) = (p / k as f64, r / k as f64);
    let b2 = CHRF_BETA * CHRF_BETA;
    if p + r == 0.0 {
        0.0
    } else {
        100.0 * (1.0 + b2) * p * r / (b2 * p + r)
    }
}

/// Corpus chrF++: statistics are summed over pairs before the F-score.
pub fn chrf_pp<S: AsRef<str>, R: AsRef<str>>(hyps: &[S], refs: &[R]) -> Result<f64> {
    check_pairing(hyps, refs)?;
    let mut total = vec![[0usize; 3]; CHRF_CHAR_ORDER + CHRF_WORD_ORDER];
    for (h, r) in hyps.iter().zip(refs) {
        for (t, s) in total.iter_mut().zip(chrf_stats(h.as_ref(), r.as_ref())) {
            for i in 0..3 {
                t[i] += s[i];
            }
        }
    }
    Ok(chrf_from_stats(&total))
}

pub fn score<S: AsRef<str>, R: AsRef<str>>(hyps: &[S], refs: &[R]) -> Result<ScoreReport> {
    let b = corpus_bleu(hyps, refs)?;
    Ok(ScoreReport {
        bleu: b.bleu,
        ngram_precisions: b.ngram_precisions,
        brevity_penalty: b.brevity_penalty,
        hyp_len: b.hyp_len,
        ref_len: b.ref_len,
        chrf_pp: chrf_pp(hyps, refs)?,
    })
}
