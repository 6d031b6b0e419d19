//! Checkpoint container.
//!
//! Layout: the magic `STLBCKPT`, a little-endian `u64` header length, a JSON
//! header, then every tensor as raw little-endian `f64` in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tape::Tensor;
use super::vocab::Vocab;
use super::{ModelConfig, ModelState};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"STLBCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    dtype: String,
    config: ModelConfig,
    vocab: Vec<char>,
    step: u64,
    epoch: u64,
    tensors: Vec<Entry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: [usize; 2],
    offset: usize,
}

pub fn encode(state: &ModelState, vocab: &Vocab) -> Vec<u8> {
    let groups: [(&str, &[Tensor]); 3] = [("", &state.params), ("adam.m.", &state.adam_m), ("adam.v.", &state.adam_v)];
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (prefix, group) in groups {
        for (spec, t) in state.specs.iter().zip(group) {
            tensors.push(Entry {
                name: format!("{prefix}{}", spec.name),
                shape: t.shape(),
                offset,
            });
            offset += t.len() * 8;
        }
    }
    let header = Header {
        version: FORMAT_VERSION,
        dtype: "f64".into(),
        config: state.config.clone(),
        vocab: vocab.chars().to_vec(),
        step: state.step,
        epoch: state.epoch,
        tensors,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, group) in groups {
        for t in group {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(ModelState, Vocab)> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing checkpoint magic"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body_start = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header =
        serde_json::from_slice(&bytes[16..body_start]).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
    }
    if header.dtype != "f64" {
        return Err(Error::Checkpoint(format!("unsupported dtype {}", header.dtype)));
    }
    let body = &bytes[body_start..];
    let mut named = std::collections::HashMap::new();
    for e in &header.tensors {
        let n = e.shape[0] * e.shape[1];
        let end = e.offset + n * 8;
        if end > body.len() {
            return Err(Error::Checkpoint(format!("tensor {} runs past end of file", e.name)));
        }
        let data = body[e.offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        named.insert(e.name.as_str(), Tensor::new(e.shape[0], e.shape[1], data));
    }
    let specs = super::param_specs(&header.config);
    let take = |prefix: &str, named: &mut std::collections::HashMap<&str, Tensor>| -> Result<Vec<Tensor>> {
        specs
            .iter()
            .map(|s| {
                let key = format!("{prefix}{}", s.name);
                named
                    .remove(key.as_str())
                    .ok_or_else(|| Error::Checkpoint(format!("missing tensor {key}")))
            })
            .collect()
    };
    let params = take("", &mut named)?;
    let adam_m = take("adam.m.", &mut named)?;
    let adam_v = take("adam.v.", &mut named)?;
    let mut state = ModelState::from_parts(header.config, params)?;
    for (which, moments) in [("adam.m", &adam_m), ("adam.v", &adam_v)] {
        for (p, m) in state.params.iter().zip(moments) {
            if p.shape() != m.shape() {
                return Err(Error::Checkpoint(format!("{which} shape mismatch")));
            }
        }
    }
    state.adam_m = adam_m;
    state.adam_v = adam_v;
    state.step = header.step;
    state.epoch = header.epoch;
    let vocab = Vocab::from_chars(header.vocab)?;
    if vocab.size() != state.config.vocab_size {
        return Err(Error::Checkpoint(format!(
            "vocab has {} entries but the model expects {}",
            vocab.size(),
            state.config.vocab_size
        )));
    }
    Ok((state, vocab))
}

pub fn save(state: &ModelState, vocab: &Vocab, path: &Path) -> Result<()> {
    std::fs::write(path, encode(state, vocab)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(ModelState, Vocab)> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
