use rand_chacha::ChaCha8Rng;

use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::model::tape::Tensor;
use crate::model::{forward_pass, ModelState};

/// Label-smoothed cross-entropy averaged over non-PAD positions of the whole
/// batch. `logits[b]` has one row per entry of `targets[b]`. Returns the
/// loss and its gradient with respect to each item's logits.
pub fn label_smoothed_loss(
    logits: &[&Tensor],
    targets: &[&[u32]],
    eps: f64,
    pad_id: u32,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("label smoothing {eps} outside [0, 1)")));
    }
    if logits.len() != targets.len() {
        return Err(Error::Pairing {
            hyps: logits.len(),
            refs: targets.len(),
        });
    }
    let mut count = 0usize;
    for (l, t) in logits.iter().zip(targets) {
        if l.rows != t.len() {
            return Err(Error::Domain(format!("{} logit rows for {} targets", l.rows, t.len())));
        }
        count += t.iter().filter(|&&g| g != pad_id).count();
    }
    let mut grads: Vec<Vec<f64>> = logits.iter().map(|l| vec![0.0; l.len()]).collect();
    if count == 0 {
        return Ok((0.0, grads));
    }
    let norm = 1.0 / count as f64;
    let mut total = 0.0;
    for ((l, t), g) in logits.iter().zip(targets).zip(&mut grads) {
        let v = l.cols;
        let off = if v > 1 { eps / (v - 1) as f64 } else { 0.0 };
        for (i, &gold) in t.iter().enumerate() {
            if gold == pad_id {
                continue;
            }
            let row = l.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            let out = &mut g[i * v..(i + 1) * v];
            for (k, (&x, o)) in row.iter().zip(out.iter_mut()).enumerate() {
                let q = if k == gold as usize { 1.0 - eps } else { off };
                let logp = x - lse;
                if q > 0.0 {
                    total -= q * logp;
                }
                *o = (logp.exp() - q) * norm;
            }
        }
    }
    Ok((total * norm, grads))
}

/// Utterance features paired with full `BOS … EOS` target sequences.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub features: Vec<FeatureMatrix>,
    pub targets: Vec<Vec<u32>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Teacher-forced loss of `batch`: the decoder reads `target[..n-1]` and is
/// scored against `target[1..]`.
pub fn batch_loss(state: &ModelState, batch: &Batch, eps: f64) -> Result<f64> {
    Ok(batch_loss_and_grads(state, batch, eps, None)?.0)
}

pub fn batch_loss_and_grads(
    state: &ModelState,
    batch: &Batch,
    eps: f64,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Vec<Tensor>)> {
    if batch.targets.iter().any(|t| t.len() < 2) {
        return Err(Error::Domain("target sequences need at least BOS and EOS".into()));
    }
    let prefixes: Vec<Vec<u32>> = batch.targets.iter().map(|t| t[..t.len() - 1].to_vec()).collect();
    let gold: Vec<&[u32]> = batch.targets.iter().map(|t| &t[1..]).collect();
    let pass = forward_pass(state, &batch.features, &prefixes, dropout_rng)?;
    let (loss, logit_grads) = label_smoothed_loss(&pass.logits(), &gold, eps, crate::model::vocab::PAD)?;
    Ok((loss, pass.backward(logit_grads, state)))
}
