//! Greedy, beam and exhaustive decoding.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::model::infer::{log_softmax, DecoderCache, IncrementalDecoder};
use crate::model::vocab::{BOS, EOS, PAD};
use crate::model::ModelState;

pub const MAX_LEN_CAP: usize = 256;
pub const ORACLE_CAPACITY: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    /// `BOS … EOS`.
    pub tokens: Vec<u32>,
    pub score: f64,
    pub normalized_score: f64,
    /// The decode ran out of steps and EOS was appended without being scored.
    pub truncated: bool,
}

impl Hypothesis {
    fn finish(mut body: Vec<u32>, score: f64, truncated: bool) -> Self {
        // body already holds BOS and, when not truncated, the scored EOS
        let generated = body.len() - 1;
        if truncated {
            body.push(EOS);
        }
        Hypothesis {
            tokens: body,
            score,
            normalized_score: normalize(score, generated),
            truncated,
        }
    }

    /// Tokens strictly between BOS and EOS.
    pub fn content(&self) -> &[u32] {
        &self.tokens[1..self.tokens.len() - 1]
    }
}

/// Length normalization with exponent 1.
pub fn normalize(score: f64, generated: usize) -> f64 {
    if generated == 0 {
        score
    } else {
        score / generated as f64
    }
}

/// `min(256, 4 × encoder memory length)`.
pub fn default_max_len(memory_len: usize) -> usize {
    MAX_LEN_CAP.min(4 * memory_len).max(1)
}

fn emittable(vocab_size: usize) -> impl Iterator<Item = u32> {
    (0..vocab_size as u32).filter(|&t| t != PAD && t != BOS)
}

fn final_order(a: &(Hypothesis, usize), b: &(Hypothesis, usize)) -> Ordering {
    b.0.normalized_score
        .total_cmp(&a.0.normalized_score)
        .then_with(|| a.0.tokens.cmp(&b.0.tokens))
        .then_with(|| a.1.cmp(&b.1))
}

fn best(mut finished: Vec<(Hypothesis, usize)>) -> Hypothesis {
    finished.sort_by(final_order);
    finished.swap_remove(0).0
}

fn check_args(beam: usize, max_len: usize) -> Result<()> {
    if beam == 0 {
        return Err(Error::Domain("beam must be at least 1".into()));
    }
    if max_len == 0 {
        return Err(Error::Domain("max_len must be at least 1".into()));
    }
    Ok(())
}

pub fn greedy(state: &ModelState, features: &FeatureMatrix, max_len: usize) -> Result<Hypothesis> {
    check_args(1, max_len)?;
    let dec = IncrementalDecoder::new(state, features)?;
    Ok(greedy_with(&dec, max_len))
}

pub fn greedy_with(dec: &IncrementalDecoder, max_len: usize) -> Hypothesis {
    let mut cache = dec.empty_cache();
    let mut tokens = vec![BOS];
    let mut score = 0.0;
    for _ in 0..max_len {
        let lp = log_softmax(&dec.step(&mut cache, *tokens.last().unwrap()));
        let mut pick = None::<(u32, f64)>;
        for t in emittable(dec.vocab_size()) {
            if pick.is_none_or(|(_, s)| lp[t as usize] > s) {
                pick = Some((t, lp[t as usize]));
            }
        }
        let (t, s) = pick.expect("vocabulary has emittable tokens");
        score += s;
        tokens.push(t);
        if t == EOS {
            return Hypothesis::finish(tokens, score, false);
        }
    }
    Hypothesis::finish(tokens, score, true)
}

pub fn beam_search(state: &ModelState, features: &FeatureMatrix, beam: usize, max_len: usize) -> Result<Hypothesis> {
    check_args(beam, max_len)?;
    let dec = IncrementalDecoder::new(state, features)?;
    Ok(beam_search_with(&dec, beam, max_len))
}

struct Live {
    tokens: Vec<u32>,
    score: f64,
    cache: DecoderCache,
}

/// Keeps the `beam` best extensions by cumulative log-probability at each
/// step; ties go to the lower token id, then the earlier parent.
pub fn beam_search_with(dec: &IncrementalDecoder, beam: usize, max_len: usize) -> Hypothesis {
    let mut live = vec![Live {
        tokens: vec![BOS],
        score: 0.0,
        cache: dec.empty_cache(),
    }];
    let mut finished: Vec<(Hypothesis, usize)> = Vec::new();
    for _ in 0..max_len {
        let mut candidates: Vec<(f64, u32, usize)> = Vec::new();
        let mut stepped = Vec::with_capacity(live.len());
        for (parent, h) in live.iter().enumerate() {
            let mut cache = h.cache.clone();
            let lp = log_softmax(&dec.step(&mut cache, *h.tokens.last().unwrap()));
            for t in emittable(dec.vocab_size()) {
                candidates.push((h.score + lp[t as usize], t, parent));
            }
            stepped.push(cache);
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        candidates.truncate(beam);
        let mut next = Vec::with_capacity(candidates.len());
        for (score, t, parent) in candidates {
            let mut tokens = live[parent].tokens.clone();
            tokens.push(t);
            if t == EOS {
                let order = finished.len();
                finished.push((Hypothesis::finish(tokens, score, false), order));
            } else {
                next.push(Live {
                    tokens,
                    score,
                    cache: stepped[parent].clone(),
                });
            }
        }
        live = next;
        if live.is_empty() {
            break;
        }
    }
    for h in live {
        let order = finished.len();
        finished.push((Hypothesis::finish(h.tokens, h.score, true), order));
    }
    best(finished)
}

/// Number of hypotheses the exhaustive oracle scores: every body of fewer
/// than `max_len` tokens closed by EOS, plus every truncated body of exactly
/// `max_len` tokens.
pub fn oracle_size(vocab_size: usize, max_len: usize) -> u128 {
    let c = emittable(vocab_size).filter(|&t| t != EOS).count() as u128;
    let mut total = 0u128;
    let mut power = 1u128;
    for _ in 0..max_len {
        total = total.saturating_add(power);
        power = power.saturating_mul(c);
    }
    total.saturating_add(power)
}

pub fn exhaustive_oracle(state: &ModelState, features: &FeatureMatrix, max_len: usize) -> Result<Hypothesis> {
    check_args(1, max_len)?;
    let n = oracle_size(state.config.vocab_size, max_len);
    if n > ORACLE_CAPACITY {
        return Err(Error::Capacity(n));
    }
    let dec = IncrementalDecoder::new(state, features)?;
    let mut finished = Vec::new();
    let mut tokens = vec![BOS];
    explore(&dec, dec.empty_cache(), &mut tokens, 0.0, max_len, &mut finished);
    Ok(best(finished))
}

fn explore(
    dec: &IncrementalDecoder,
    mut cache: DecoderCache,
    tokens: &mut Vec<u32>,
    score: f64,
    steps_left: usize,
    out: &mut Vec<(Hypothesis, usize)>,
) {
    if steps_left == 0 {
        let order = out.len();
        out.push((Hypothesis::finish(tokens.clone(), score, true), order));
        return;
    }
    let lp = log_softmax(&dec.step(&mut cache, *tokens.last().unwrap()));
    for t in emittable(dec.vocab_size()) {
        tokens.push(t);
        let s = score + lp[t as usize];
        if t == EOS {
            let order = out.len();
            out.push((Hypothesis::finish(tokens.clone(), s, false), order));
        } else {
            explore(dec, cache.clone(), tokens, s, steps_left - 1, out);
        }
        tokens.pop();
    }
}

/// One decoded utterance in the output file.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLine {
    pub id: String,
    pub text: String,
    pub normalized_score: f64,
    pub truncated: bool,
}

/// `id \t text \t normalized_score \t truncated`, one line per utterance.
pub fn write_decodes(path: &Path, lines: &[DecodedLine]) -> Result<()> {
    let mut out = Vec::new();
    for l in lines {
        writeln!(out, "{}\t{}\t{}\t{}", l.id, l.text, l.normalized_score, l.truncated).expect("vec write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_decodes(path: &Path) -> Result<Vec<DecodedLine>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_decodes(&text)
}

pub fn parse_decodes(text: &str) -> Result<Vec<DecodedLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = |m: &str| Error::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad("expected 4 tab-separated fields"));
            }
            Ok(DecodedLine {
                id: f[0].to_string(),
                text: f[1].to_string(),
                normalized_score: f[2].parse().map_err(|_| bad("bad score"))?,
                truncated: f[3].parse().map_err(|_| bad("bad truncated flag"))?,
            })
        })
        .collect()
}
