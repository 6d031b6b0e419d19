//! Tiny conformer-style encoder with a transformer decoder.
//!
//! Encoder: frame stacking by `conv_subsample_factor` followed by a linear
//! projection (a strided convolution with kernel = stride), sinusoidal
//! positions, then blocks of self-attention, a depthwise convolution module
//! (kernel 3) and a feed-forward module, each pre-normalized with a
//! residual connection. Decoder: character embeddings, causal
//! self-attention, cross-attention over the encoder memory, feed-forward,
//! and an output projection over the vocabulary.

pub mod checkpoint;
pub mod gradcheck;
pub mod infer;
pub mod tape;
pub mod vocab;

use std::collections::HashMap;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{FeatureMatrix, N_MELS};
use crate::error::{Error, Result};
use tape::{NodeId, Tape, Tensor};
use vocab::{BOS, PAD};

pub const CONV_KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub ff_dim: usize,
    pub conv_subsample_factor: usize,
    pub dropout: f64,
    pub vocab_size: usize,
    /// Feature bins per input frame.
    pub input_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 64,
            n_heads: 4,
            enc_layers: 2,
            dec_layers: 2,
            ff_dim: 128,
            conv_subsample_factor: 4,
            dropout: 0.1,
            vocab_size: vocab::Vocab::devanagari().size(),
            input_dim: N_MELS,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("enc_layers", self.enc_layers),
            ("dec_layers", self.dec_layers),
            ("ff_dim", self.ff_dim),
            ("conv_subsample_factor", self.conv_subsample_factor),
            ("input_dim", self.input_dim),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.vocab_size <= vocab::N_SPECIALS as usize {
            return Err(Error::config("vocab_size", "must exceed the 4 special tokens"));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::config(
                "d_model",
                format!("{} is not divisible by n_heads = {}", self.d_model, self.n_heads),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Encoder memory length for `frames` input frames.
    pub fn memory_len(&self, frames: usize) -> usize {
        frames.div_ceil(self.conv_subsample_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParamKind {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Weight { fan_in: usize, fan_out: usize },
    Bias,
    /// Layer-norm gain, initialized to one.
    Gain,
}

impl ParamKind {
    pub fn init_bound(&self) -> Option<f64> {
        match *self {
            ParamKind::Weight { fan_in, fan_out } => Some((6.0 / (fan_in + fan_out) as f64).sqrt()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: ParamKind,
}

fn weight(name: String, rows: usize, cols: usize) -> ParamSpec {
    ParamSpec {
        name,
        rows,
        cols,
        kind: ParamKind::Weight {
            fan_in: rows,
            fan_out: cols,
        },
    }
}

fn linear_specs(out: &mut Vec<ParamSpec>, prefix: &str, inp: usize, outp: usize) {
    out.push(weight(format!("{prefix}.w"), inp, outp));
    out.push(ParamSpec {
        name: format!("{prefix}.b"),
        rows: 1,
        cols: outp,
        kind: ParamKind::Bias,
    });
}

fn norm_specs(out: &mut Vec<ParamSpec>, prefix: &str, d: usize) {
    out.push(ParamSpec {
        name: format!("{prefix}.g"),
        rows: 1,
        cols: d,
        kind: ParamKind::Gain,
    });
    out.push(ParamSpec {
        name: format!("{prefix}.b"),
        rows: 1,
        cols: d,
        kind: ParamKind::Bias,
    });
}

fn attention_specs(out: &mut Vec<ParamSpec>, prefix: &str, d: usize) {
    for p in ["q", "k", "v", "o"] {
        linear_specs(out, &format!("{prefix}.{p}"), d, d);
    }
}

/// The parameter inventory, in a fixed order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let d = cfg.d_model;
    let mut s = Vec::new();
    linear_specs(&mut s, "enc.in", cfg.input_dim * cfg.conv_subsample_factor, d);
    for l in 0..cfg.enc_layers {
        norm_specs(&mut s, &format!("enc.{l}.attn_norm"), d);
        attention_specs(&mut s, &format!("enc.{l}.attn"), d);
        norm_specs(&mut s, &format!("enc.{l}.conv_norm"), d);
        s.push(ParamSpec {
            name: format!("enc.{l}.conv.dw.w"),
            rows: CONV_KERNEL,
            cols: d,
            kind: ParamKind::Weight {
                fan_in: CONV_KERNEL,
                fan_out: CONV_KERNEL,
            },
        });
        s.push(ParamSpec {
            name: format!("enc.{l}.conv.dw.b"),
            rows: 1,
            cols: d,
            kind: ParamKind::Bias,
        });
        linear_specs(&mut s, &format!("enc.{l}.conv.pw"), d, d);
        norm_specs(&mut s, &format!("enc.{l}.ff_norm"), d);
        linear_specs(&mut s, &format!("enc.{l}.ff1"), d, cfg.ff_dim);
        linear_specs(&mut s, &format!("enc.{l}.ff2"), cfg.ff_dim, d);
    }
    norm_specs(&mut s, "enc.norm", d);
    s.push(weight("dec.embed".into(), cfg.vocab_size, d));
    for l in 0..cfg.dec_layers {
        norm_specs(&mut s, &format!("dec.{l}.self_norm"), d);
        attention_specs(&mut s, &format!("dec.{l}.self_attn"), d);
        norm_specs(&mut s, &format!("dec.{l}.cross_norm"), d);
        attention_specs(&mut s, &format!("dec.{l}.cross_attn"), d);
        norm_specs(&mut s, &format!("dec.{l}.ff_norm"), d);
        linear_specs(&mut s, &format!("dec.{l}.ff1"), d, cfg.ff_dim);
        linear_specs(&mut s, &format!("dec.{l}.ff2"), cfg.ff_dim, d);
    }
    norm_specs(&mut s, "dec.norm", d);
    linear_specs(&mut s, "dec.out", d, cfg.vocab_size);
    s
}

/// Parameters, Adam moments and training counters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub specs: Vec<ParamSpec>,
    pub params: Vec<Tensor>,
    pub adam_m: Vec<Tensor>,
    pub adam_v: Vec<Tensor>,
    pub step: u64,
    pub epoch: u64,
    index: HashMap<String, usize>,
}

impl ModelState {
    pub(crate) fn from_parts(config: ModelConfig, params: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let specs = param_specs(&config);
        if specs.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, got {}",
                specs.len(),
                params.len()
            )));
        }
        for (s, p) in specs.iter().zip(&params) {
            if [s.rows, s.cols] != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    s.name,
                    p.shape(),
                    [s.rows, s.cols]
                )));
            }
        }
        let index = specs
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), i))
            .collect();
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.rows, p.cols)).collect();
        Ok(ModelState {
            config,
            specs,
            adam_m: zeros.clone(),
            adam_v: zeros,
            params,
            step: 0,
            epoch: 0,
            index,
        })
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn param(&self, name: &str) -> &Tensor {
        &self.params[self.index[name]]
    }

    pub fn param_mut(&mut self, name: &str) -> &mut Tensor {
        let i = self.index[name];
        &mut self.params[i]
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_weights(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }
}

/// Deterministic initialization from `seed`.
pub fn init(cfg: &ModelConfig, seed: u64) -> Result<ModelState> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = param_specs(cfg)
        .iter()
        .map(|s| {
            let n = s.rows * s.cols;
            let data = match s.kind {
                ParamKind::Weight { .. } => {
                    let bound = s.kind.init_bound().unwrap();
                    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
                }
                ParamKind::Bias => vec![0.0; n],
                ParamKind::Gain => vec![1.0; n],
            };
            Tensor::new(s.rows, s.cols, data)
        })
        .collect();
    ModelState::from_parts(cfg.clone(), params)
}

pub fn sinusoid(len: usize, d: usize) -> Tensor {
    let mut data = Vec::with_capacity(len * d);
    for pos in 0..len {
        for i in 0..d {
            let rate = 10_000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 / rate;
            data.push(if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    Tensor::new(len, d, data)
}

/// Stacks `factor` consecutive frames into one row, zero-padding the tail.
pub fn stack_frames(f: &FeatureMatrix, factor: usize) -> Tensor {
    let rows = f.frames().div_ceil(factor);
    let width = f.bins() * factor;
    let mut data = vec![0.0; rows * width];
    data[..f.data().len()].copy_from_slice(f.data());
    Tensor::new(rows, width, data)
}

fn check_finite(tape: &Tape, id: NodeId, layer: &str) -> Result<()> {
    if tape.value(id).is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical {
            layer: layer.to_string(),
        })
    }
}

/// Builds forward graphs on a tape, creating each parameter leaf once.
pub(crate) struct Graph<'a> {
    pub tape: Tape,
    state: &'a ModelState,
    leaves: Vec<Option<NodeId>>,
    dropout: Option<(&'a mut ChaCha8Rng, f64)>,
}

impl<'a> Graph<'a> {
    pub fn new(state: &'a ModelState, dropout_rng: Option<&'a mut ChaCha8Rng>) -> Self {
        let p = state.config.dropout;
        Graph {
            tape: Tape::new(),
            state,
            leaves: vec![None; state.params.len()],
            dropout: dropout_rng.filter(|_| p > 0.0).map(|r| (r, p)),
        }
    }

    fn p(&mut self, name: &str) -> NodeId {
        let i = self.state.index[name];
        if let Some(id) = self.leaves[i] {
            return id;
        }
        let id = self.tape.param(i, self.state.params[i].clone());
        self.leaves[i] = Some(id);
        id
    }

    fn linear(&mut self, x: NodeId, prefix: &str) -> NodeId {
        let w = self.p(&format!("{prefix}.w"));
        let b = self.p(&format!("{prefix}.b"));
        let y = self.tape.matmul(x, w);
        self.tape.add_row(y, b)
    }

    fn norm(&mut self, x: NodeId, prefix: &str) -> NodeId {
        let g = self.p(&format!("{prefix}.g"));
        let b = self.p(&format!("{prefix}.b"));
        self.tape.layer_norm(x, g, b)
    }

    fn dropout(&mut self, x: NodeId) -> NodeId {
        let Some((rng, p)) = self.dropout.as_mut() else {
            return x;
        };
        let keep = 1.0 / (1.0 - *p);
        let mask = (0..self.tape.value(x).len())
            .map(|_| if rng.random::<f64>() < *p { 0.0 } else { keep })
            .collect();
        self.tape.dropout(x, mask)
    }

    fn attention(
        &mut self,
        query: NodeId,
        memory: NodeId,
        prefix: &str,
        mask: Option<Rc<Vec<bool>>>,
    ) -> NodeId {
        let heads = self.state.config.n_heads;
        let dk = self.state.config.head_dim();
        let q = self.linear(query, &format!("{prefix}.q"));
        let k = self.linear(memory, &format!("{prefix}.k"));
        let v = self.linear(memory, &format!("{prefix}.v"));
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.tape.cols(q, h * dk, dk);
            let kh = self.tape.cols(k, h * dk, dk);
            let vh = self.tape.cols(v, h * dk, dk);
            let scores = self.tape.matmul_bt(qh, kh);
            let scores = self.tape.scale(scores, 1.0 / (dk as f64).sqrt());
            let probs = self.tape.masked_softmax(scores, mask.clone());
            outs.push(self.tape.matmul(probs, vh));
        }
        let joined = if heads == 1 { outs[0] } else { self.tape.concat_cols(outs) };
        self.linear(joined, &format!("{prefix}.o"))
    }

    fn feed_forward(&mut self, x: NodeId, prefix: &str) -> NodeId {
        let h = self.linear(x, &format!("{prefix}.ff1"));
        let h = self.tape.silu(h);
        self.linear(h, &format!("{prefix}.ff2"))
    }

    fn residual(&mut self, x: NodeId, branch: NodeId) -> NodeId {
        let b = self.dropout(branch);
        self.tape.add(x, b)
    }

    pub fn encode(&mut self, features: &FeatureMatrix) -> Result<NodeId> {
        let cfg = &self.state.config;
        let (factor, d) = (cfg.conv_subsample_factor, cfg.d_model);
        if features.frames() < factor {
            return Err(Error::TooShort {
                min: factor,
                got: features.frames(),
                unit: "frames",
            });
        }
        if features.bins() != cfg.input_dim {
            return Err(Error::config(
                "input_dim",
                format!("features have {} bins, model expects {}", features.bins(), cfg.input_dim),
            ));
        }
        let stacked = stack_frames(features, factor);
        let len = stacked.rows;
        let x = self.tape.constant(stacked);
        let x = self.linear(x, "enc.in");
        let pe = self.tape.constant(sinusoid(len, d));
        let mut x = self.tape.add(x, pe);
        check_finite(&self.tape, x, "enc.in")?;
        for l in 0..self.state.config.enc_layers {
            let h = self.norm(x, &format!("enc.{l}.attn_norm"));
            let a = self.attention(h, h, &format!("enc.{l}.attn"), None);
            x = self.residual(x, a);

            let h = self.norm(x, &format!("enc.{l}.conv_norm"));
            let w = self.p(&format!("enc.{l}.conv.dw.w"));
            let b = self.p(&format!("enc.{l}.conv.dw.b"));
            let c = self.tape.depthwise_conv(h, w, b);
            let c = self.tape.silu(c);
            let c = self.linear(c, &format!("enc.{l}.conv.pw"));
            x = self.residual(x, c);

            let h = self.norm(x, &format!("enc.{l}.ff_norm"));
            let f = self.feed_forward(h, &format!("enc.{l}"));
            x = self.residual(x, f);
            check_finite(&self.tape, x, &format!("enc.{l}"))?;
        }
        Ok(self.norm(x, "enc.norm"))
    }

    /// Teacher-forced decoder pass; returns `len(prefix) × vocab` logits.
    pub fn decode(&mut self, memory: NodeId, prefix: &[u32]) -> Result<NodeId> {
        let cfg = &self.state.config;
        let (d, vocab) = (cfg.d_model, cfg.vocab_size);
        if prefix.first() != Some(&BOS) {
            return Err(Error::Domain("target prefix must start with BOS".into()));
        }
        if let Some(&bad) = prefix.iter().find(|&&t| t as usize >= vocab) {
            return Err(Error::Domain(format!("token id {bad} outside vocabulary of {vocab}")));
        }
        let len = prefix.len();
        let mut mask = vec![false; len * len];
        for i in 0..len {
            for j in 0..=i {
                mask[i * len + j] = prefix[j] != PAD;
            }
        }
        let mask = Rc::new(mask);
        let table = self.p("dec.embed");
        let emb = self.tape.gather(table, prefix.iter().map(|&t| t as usize).collect());
        let emb = self.tape.scale(emb, (d as f64).sqrt());
        let pe = self.tape.constant(sinusoid(len, d));
        let mut x = self.tape.add(emb, pe);
        for l in 0..self.state.config.dec_layers {
            let h = self.norm(x, &format!("dec.{l}.self_norm"));
            let a = self.attention(h, h, &format!("dec.{l}.self_attn"), Some(mask.clone()));
            x = self.residual(x, a);

            let h = self.norm(x, &format!("dec.{l}.cross_norm"));
            let a = self.attention(h, memory, &format!("dec.{l}.cross_attn"), None);
            x = self.residual(x, a);

            let h = self.norm(x, &format!("dec.{l}.ff_norm"));
            let f = self.feed_forward(h, &format!("dec.{l}"));
            x = self.residual(x, f);
            check_finite(&self.tape, x, &format!("dec.{l}"))?;
        }
        let x = self.norm(x, "dec.norm");
        let logits = self.linear(x, "dec.out");
        check_finite(&self.tape, logits, "dec.out")?;
        Ok(logits)
    }
}

/// A recorded forward pass over a batch, ready for back-propagation.
pub struct ForwardPass {
    tape: Tape,
    logits: Vec<NodeId>,
    n_params: usize,
}

impl ForwardPass {
    pub fn logits(&self) -> Vec<&Tensor> {
        self.logits.iter().map(|&id| self.tape.value(id)).collect()
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: tape::BackwardFault) {
        self.tape.inject_fault(fault);
    }

    /// Gradients of the parameters given gradients w.r.t. each item's
    /// logits. Parameters the batch did not touch get zero gradients.
    pub fn backward(&self, logit_grads: Vec<Vec<f64>>, state: &ModelState) -> Vec<Tensor> {
        let seeds = self.logits.iter().copied().zip(logit_grads).collect();
        self.tape
            .backward(seeds, self.n_params)
            .into_iter()
            .zip(&state.params)
            .map(|(g, p)| Tensor::new(p.rows, p.cols, g.unwrap_or_else(|| vec![0.0; p.len()])))
            .collect()
    }
}

/// Teacher-forced forward pass over a batch. Items are processed at their
/// own lengths, so no padding interacts across the batch. Dropout is active
/// only when an RNG is supplied.
pub fn forward_pass(
    state: &ModelState,
    features: &[FeatureMatrix],
    prefixes: &[Vec<u32>],
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<ForwardPass> {
    if features.len() != prefixes.len() {
        return Err(Error::Pairing {
            hyps: features.len(),
            refs: prefixes.len(),
        });
    }
    let mut g = Graph::new(state, dropout_rng);
    let mut logits = Vec::with_capacity(features.len());
    for (f, p) in features.iter().zip(prefixes) {
        let memory = g.encode(f)?;
        logits.push(g.decode(memory, p)?);
    }
    Ok(ForwardPass {
        tape: g.tape,
        logits,
        n_params: state.params.len(),
    })
}

/// Evaluation-mode forward pass: `batch × (len × vocab)` logits.
pub fn forward(state: &ModelState, features: &[FeatureMatrix], prefixes: &[Vec<u32>]) -> Result<Vec<Tensor>> {
    let pass = forward_pass(state, features, prefixes, None)?;
    Ok(pass.logits().into_iter().cloned().collect())
}

/// Encoder output for one utterance.
pub fn encode(state: &ModelState, features: &FeatureMatrix) -> Result<Tensor> {
    let mut g = Graph::new(state, None);
    let m = g.encode(features)?;
    Ok(g.tape.value(m).clone())
}
