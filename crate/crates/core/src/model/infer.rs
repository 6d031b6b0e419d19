//! Incremental decoding with per-layer key/value caches.
//!
//! Produces the same logits as the teacher-forced pass in `model::forward`
//! (up to floating-point association) while costing one position per step.

use super::tape::{layer_norm_row, masked_softmax_row, matmul, matmul_bt, silu, Tensor};
use super::{encode, sinusoid, ModelState};
use crate::dsp::FeatureMatrix;
use crate::error::Result;

/// Self-attention keys and values of the tokens fed so far.
#[derive(Debug, Clone)]
pub struct DecoderCache {
    len: usize,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

impl DecoderCache {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// A frozen model bound to one utterance's encoder memory.
pub struct IncrementalDecoder<'a> {
    state: &'a ModelState,
    memory_len: usize,
    cross_keys: Vec<Vec<f64>>,
    cross_values: Vec<Vec<f64>>,
}

impl<'a> IncrementalDecoder<'a> {
    pub fn new(state: &'a ModelState, features: &FeatureMatrix) -> Result<Self> {
        let memory = encode(state, features)?;
        Ok(Self::from_memory(state, &memory))
    }

    pub fn from_memory(state: &'a ModelState, memory: &Tensor) -> Self {
        let mut cross_keys = Vec::new();
        let mut cross_values = Vec::new();
        for l in 0..state.config.dec_layers {
            cross_keys.push(linear(state, &memory.data, memory.rows, &format!("dec.{l}.cross_attn.k")));
            cross_values.push(linear(state, &memory.data, memory.rows, &format!("dec.{l}.cross_attn.v")));
        }
        IncrementalDecoder {
            state,
            memory_len: memory.rows,
            cross_keys,
            cross_values,
        }
    }

    pub fn memory_len(&self) -> usize {
        self.memory_len
    }

    pub fn vocab_size(&self) -> usize {
        self.state.config.vocab_size
    }

    pub fn empty_cache(&self) -> DecoderCache {
        let n = self.state.config.dec_layers;
        DecoderCache {
            len: 0,
            keys: vec![Vec::new(); n],
            values: vec![Vec::new(); n],
        }
    }

    /// Feeds `token` at the next position and returns the logits there.
    pub fn step(&self, cache: &mut DecoderCache, token: u32) -> Vec<f64> {
        let cfg = &self.state.config;
        let d = cfg.d_model;
        let pos = cache.len;
        let embed = self.state.param("dec.embed");
        let scale = (d as f64).sqrt();
        let pe = sinusoid(pos + 1, d);
        let mut x: Vec<f64> = embed
            .row(token as usize)
            .iter()
            .zip(pe.row(pos))
            .map(|(e, p)| e * scale + p)
            .collect();
        let mut h = vec![0.0; d];
        for l in 0..cfg.dec_layers {
            self.norm(&x, &format!("dec.{l}.self_norm"), &mut h);
            let prefix = format!("dec.{l}.self_attn");
            let k = linear(self.state, &h, 1, &format!("{prefix}.k"));
            let v = linear(self.state, &h, 1, &format!("{prefix}.v"));
            cache.keys[l].extend_from_slice(&k);
            cache.values[l].extend_from_slice(&v);
            let a = self.attend(&h, &cache.keys[l], &cache.values[l], pos + 1, &prefix);
            add_into(&mut x, &a);

            self.norm(&x, &format!("dec.{l}.cross_norm"), &mut h);
            let a = self.attend(
                &h,
                &self.cross_keys[l],
                &self.cross_values[l],
                self.memory_len,
                &format!("dec.{l}.cross_attn"),
            );
            add_into(&mut x, &a);

            self.norm(&x, &format!("dec.{l}.ff_norm"), &mut h);
            let f = linear(self.state, &h, 1, &format!("dec.{l}.ff1"));
            let f: Vec<f64> = f.into_iter().map(silu).collect();
            let f = linear(self.state, &f, 1, &format!("dec.{l}.ff2"));
            add_into(&mut x, &f);
        }
        cache.len += 1;
        self.norm(&x, "dec.norm", &mut h);
        linear(self.state, &h, 1, "dec.out")
    }

    fn norm(&self, x: &[f64], prefix: &str, out: &mut [f64]) {
        let g = self.state.param(&format!("{prefix}.g"));
        let b = self.state.param(&format!("{prefix}.b"));
        layer_norm_row(x, &g.data, &b.data, out);
    }

    fn attend(&self, h: &[f64], keys: &[f64], values: &[f64], n: usize, prefix: &str) -> Vec<f64> {
        let heads = self.state.config.n_heads;
        let dk = self.state.config.head_dim();
        let d = self.state.config.d_model;
        let q = linear(self.state, h, 1, &format!("{prefix}.q"));
        let mut joined = Vec::with_capacity(d);
        let mut kh = vec![0.0; n * dk];
        let mut vh = vec![0.0; n * dk];
        let mut probs = vec![0.0; n];
        let inv = 1.0 / (dk as f64).sqrt();
        for head in 0..heads {
            let off = head * dk;
            for j in 0..n {
                kh[j * dk..(j + 1) * dk].copy_from_slice(&keys[j * d + off..j * d + off + dk]);
                vh[j * dk..(j + 1) * dk].copy_from_slice(&values[j * d + off..j * d + off + dk]);
            }
            let scores: Vec<f64> = matmul_bt(&q[off..off + dk], &kh, 1, dk, n)
                .into_iter()
                .map(|s| s * inv)
                .collect();
            masked_softmax_row(&scores, None, &mut probs);
            joined.extend(matmul(&probs, &vh, 1, n, dk));
        }
        linear(self.state, &joined, 1, &format!("{prefix}.o"))
    }
}

fn linear(state: &ModelState, x: &[f64], rows: usize, prefix: &str) -> Vec<f64> {
    let w = state.param(&format!("{prefix}.w"));
    let b = state.param(&format!("{prefix}.b"));
    let mut y = matmul(x, &w.data, rows, w.rows, w.cols);
    for chunk in y.chunks_mut(w.cols) {
        add_into(chunk, &b.data);
    }
    y
}

fn add_into(x: &mut [f64], y: &[f64]) {
    for (a, b) in x.iter_mut().zip(y) {
        *a += b;
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}
