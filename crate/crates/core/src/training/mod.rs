//! Optimization: loss, schedule, Adam, early stopping and the training loops.

pub mod loss;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{parse_speed_id, spec_augment, stream_rng, AugmentPolicy};
use crate::corpus::{Manifest, Utterance};
use crate::decode::{beam_search_with, default_max_len, greedy_with, DecodedLine};
use crate::dsp::{cmvn, log_mel, read_wav, speed_perturb, FeatureMatrix};
use crate::error::{Error, Result};
use crate::metrics::{chrf_pp, corpus_bleu};
use crate::model::infer::IncrementalDecoder;
use crate::model::tape::Tensor;
use crate::model::vocab::Vocab;
use crate::model::ModelState;
use loss::{batch_loss_and_grads, Batch};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.98;
pub const ADAM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lr_peak: f64,
    pub label_smoothing: f64,
    pub batch_size: usize,
    pub warmup_steps: u64,
    pub patience: usize,
    pub beam_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            lr_peak: 3e-4,
            label_smoothing: 0.1,
            batch_size: 32,
            warmup_steps: 250,
            patience: 10,
            beam_size: 10,
            max_epochs: 100,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |f: &str, m: &str| Err(Error::config(f, m));
        if !(self.lr_peak.is_finite() && self.lr_peak > 0.0) {
            return fail("lr_peak", "must be positive");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return fail("label_smoothing", "must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be at least 1");
        }
        if self.warmup_steps == 0 {
            return fail("warmup_steps", "must be at least 1");
        }
        if self.patience == 0 {
            return fail("patience", "must be at least 1");
        }
        if self.beam_size == 0 {
            return fail("beam_size", "must be at least 1");
        }
        if self.max_epochs == 0 {
            return fail("max_epochs", "must be at least 1");
        }
        Ok(())
    }
}

/// Linear warmup to `lr_peak` at step W, then `lr_peak * sqrt(W / t)`.
pub fn lr_at_step(t: u64, hp: &HyperParams) -> f64 {
    let w = hp.warmup_steps.max(1) as f64;
    let t = t as f64;
    if t <= w {
        hp.lr_peak * t / w
    } else {
        hp.lr_peak * (w / t).sqrt()
    }
}

/// One bias-corrected Adam update. Gradients are checked before anything is
/// modified, so a failed step leaves the state untouched.
pub fn adam_step(state: &mut ModelState, grads: &[Tensor], lr: f64) -> Result<()> {
    for (spec, g) in state.specs.iter().zip(grads) {
        if !g.is_finite() {
            return Err(Error::Numerical {
                layer: format!("grad:{}", spec.name),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for ((p, g), (m, v)) in state
        .params
        .iter_mut()
        .zip(grads)
        .zip(state.adam_m.iter_mut().zip(state.adam_v.iter_mut()))
    {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * gi;
            v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * gi * gi;
            let mh = m.data[i] / c1;
            let vh = v.data[i] / c2;
            p.data[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Patience on dev BLEU. A tie in BLEU counts as an improvement when chrF++
/// is strictly higher.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: Option<(f64, f64)>,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> Option<(f64, f64)> {
        self.best
    }

    pub fn observe(&mut self, epoch: usize, bleu: f64, chrf: f64) -> StopDecision {
        let better = match self.best {
            None => true,
            Some((b, c)) => bleu > b || (bleu == b && chrf > c),
        };
        if better {
            self.best = Some((bleu, chrf));
            self.best_epoch = epoch;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// A featurized utterance with its encoded target.
#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub features: FeatureMatrix,
    pub target: Vec<u32>,
    pub reference: String,
}

/// Resolves an audio path from a manifest against `audio_root` unless it is
/// absolute.
pub fn resolve_audio(audio_root: &Path, audio_path: &str) -> PathBuf {
    let p = Path::new(audio_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        audio_root.join(p)
    }
}

/// wav → optional speed perturbation (from the id suffix) → log-mel → CMVN.
pub fn utterance_features(u: &Utterance, audio_root: &Path) -> Result<FeatureMatrix> {
    let mut wav = read_wav(resolve_audio(audio_root, &u.audio_path))?;
    if let Some((_, factor)) = parse_speed_id(&u.id) {
        wav = speed_perturb(&wav, factor)?;
    }
    cmvn(&log_mel(&wav)?)
}

pub fn load_examples(m: &Manifest, audio_root: &Path, vocab: &Vocab) -> Result<Vec<Example>> {
    m.utterances
        .iter()
        .map(|u| {
            Ok(Example {
                id: u.id.clone(),
                features: utterance_features(u, audio_root)?,
                target: vocab.encode(&u.tgt_text),
                reference: u.tgt_text.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    FixedEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: u32,
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_bleu: f64,
    pub dev_chrf: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub phase: u32,
    pub n_train: usize,
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_bleu: f64,
    pub stop_reason: StopReason,
}

impl TrainLog {
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn summary_json(&self) -> String {
        serde_json::json!({
            "phase": self.phase,
            "n_train": self.n_train,
            "epochs": self.records.len(),
            "best_epoch": self.best_epoch,
            "best_dev_bleu": self.best_dev_bleu,
            "stop_reason": self.stop_reason,
        })
        .to_string()
    }

    pub fn append_to(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Dev-set BLEU and chrF++ under greedy decoding.
pub fn evaluate(state: &ModelState, dev: &[Example], vocab: &Vocab) -> Result<(f64, f64)> {
    let hyps = decode_greedy(state, dev, vocab)?;
    let refs: Vec<&str> = dev.iter().map(|e| e.reference.as_str()).collect();
    Ok((corpus_bleu(&hyps, &refs)?.bleu, chrf_pp(&hyps, &refs)?))
}

fn decode_greedy(state: &ModelState, data: &[Example], vocab: &Vocab) -> Result<Vec<String>> {
    data.iter()
        .map(|e| {
            let dec = IncrementalDecoder::new(state, &e.features)?;
            let h = greedy_with(&dec, default_max_len(dec.memory_len()));
            Ok(vocab.decode(&h.tokens))
        })
        .collect()
}

/// Beam-decodes every example; a beam of 1 runs the greedy decoder.
pub fn decode_examples(state: &ModelState, data: &[Example], vocab: &Vocab, beam: usize) -> Result<Vec<DecodedLine>> {
    data.iter()
        .map(|e| {
            let dec = IncrementalDecoder::new(state, &e.features)?;
            let max_len = default_max_len(dec.memory_len());
            let h = if beam <= 1 {
                greedy_with(&dec, max_len)
            } else {
                beam_search_with(&dec, beam, max_len)
            };
            Ok(DecodedLine {
                id: e.id.clone(),
                text: vocab.decode(&h.tokens),
                normalized_score: h.normalized_score,
                truncated: h.truncated,
            })
        })
        .collect()
}

/// Length-sorted buckets of `batch_size` example indices.
pub fn buckets(data: &[Example], batch_size: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| {
        data[a]
            .features
            .frames()
            .cmp(&data[b].features.frames())
            .then_with(|| data[a].id.cmp(&data[b].id))
    });
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

enum StopRule {
    Patience,
    Fixed(usize),
}

struct Phase<'a> {
    number: u32,
    train: &'a [Example],
    dev: &'a [Example],
    vocab: &'a Vocab,
    hp: &'a HyperParams,
    policy: &'a AugmentPolicy,
    rule: StopRule,
}

fn run_phase(mut state: ModelState, p: Phase) -> Result<(ModelState, TrainLog)> {
    p.hp.validate()?;
    p.policy.validate()?;
    if p.train.is_empty() || p.dev.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let buckets = buckets(p.train, p.hp.batch_size);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(p.hp.seed ^ 0x64_726f_706f_7574);
    dropout_rng.set_stream(p.number as u64);
    let use_dropout = state.config.dropout > 0.0;
    let epochs = match p.rule {
        StopRule::Patience => p.hp.max_epochs,
        StopRule::Fixed(k) => k,
    };
    let mut stopper = EarlyStopper::new(p.hp.patience);
    let mut best = state.clone();
    let mut records = Vec::new();
    let mut stop_reason = match p.rule {
        StopRule::Patience => StopReason::MaxEpochs,
        StopRule::Fixed(_) => StopReason::FixedEpochs,
    };
    for epoch in 1..=epochs {
        let global_epoch = state.epoch + 1;
        let mut order = buckets.clone();
        let mut shuffle_rng = stream_rng(p.hp.seed, "bucket-order", global_epoch);
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for bucket in &order {
            let batch = Batch {
                features: bucket
                    .iter()
                    .map(|&i| {
                        let e = &p.train[i];
                        if p.policy.sa_enabled {
                            spec_augment(&e.features, p.policy, &mut stream_rng(p.policy.seed, &e.id, global_epoch))
                        } else {
                            e.features.clone()
                        }
                    })
                    .collect(),
                targets: bucket.iter().map(|&i| p.train[i].target.clone()).collect(),
            };
            let rng = if use_dropout { Some(&mut dropout_rng) } else { None };
            let (loss, grads) = batch_loss_and_grads(&state, &batch, p.hp.label_smoothing, rng)?;
            if !loss.is_finite() {
                return Err(Error::Numerical { layer: "loss".into() });
            }
            let lr = lr_at_step(state.step + 1, p.hp);
            adam_step(&mut state, &grads, lr)?;
            loss_sum += loss;
        }
        state.epoch = global_epoch;
        let (bleu, chrf) = evaluate(&state, p.dev, p.vocab)?;
        records.push(EpochRecord {
            phase: p.number,
            epoch,
            train_loss: loss_sum / order.len() as f64,
            dev_bleu: bleu,
            dev_chrf: chrf,
            lr: lr_at_step(state.step, p.hp),
        });
        match stopper.observe(epoch, bleu, chrf) {
            StopDecision::Improved => best = state.clone(),
            StopDecision::Stop if matches!(p.rule, StopRule::Patience) => {
                stop_reason = StopReason::Patience;
                break;
            }
            _ => {}
        }
    }
    let n_train = p.train.len();
    let (chosen, best_epoch, best_bleu) = match p.rule {
        StopRule::Patience => (best, stopper.best_epoch(), stopper.best().map_or(0.0, |b| b.0)),
        StopRule::Fixed(_) => {
            let last = records.last().map_or(0.0, |r| r.dev_bleu);
            (state, records.len(), last)
        }
    };
    Ok((
        chosen,
        TrainLog {
            phase: p.number,
            n_train,
            records,
            best_epoch,
            best_dev_bleu: best_bleu,
            stop_reason,
        },
    ))
}

/// Trains until dev BLEU stalls for `patience` epochs or `max_epochs` runs
/// out, and returns the best-epoch model.
pub fn train(
    model: ModelState,
    train: &[Example],
    dev: &[Example],
    vocab: &Vocab,
    hp: &HyperParams,
    policy: &AugmentPolicy,
) -> Result<(ModelState, TrainLog)> {
    run_phase(
        model,
        Phase {
            number: 1,
            train,
            dev,
            vocab,
            hp,
            policy,
            rule: StopRule::Patience,
        },
    )
}

/// How long the target-only phase of joint fine-tuning runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetEpochs {
    Fixed(usize),
    Convergence,
}

impl std::str::FromStr for TargetEpochs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "convergence" {
            return Ok(TargetEpochs::Convergence);
        }
        s.parse()
            .map(TargetEpochs::Fixed)
            .map_err(|_| Error::config("k", format!("expected an epoch count or `convergence`, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLog {
    pub phase1: TrainLog,
    pub phase2: Option<TrainLog>,
}

impl JointLog {
    pub fn to_jsonl(&self) -> String {
        let mut s = self.phase1.to_jsonl();
        if let Some(p2) = &self.phase2 {
            s.push_str(&p2.to_jsonl());
        }
        s
    }
}

/// Phase 1 trains on the mixed corpus with early stopping; phase 2
/// continues on the target pair only, for `k` epochs or until early
/// stopping.
#[allow(clippy::too_many_arguments)]
pub fn joint_finetune(
    model: ModelState,
    mixed: &[Example],
    target_only: &[Example],
    dev: &[Example],
    vocab: &Vocab,
    hp: &HyperParams,
    policy: &AugmentPolicy,
    k: TargetEpochs,
) -> Result<(ModelState, JointLog)> {
    let (state, phase1) = train(model, mixed, dev, vocab, hp, policy)?;
    let rule = match k {
        TargetEpochs::Fixed(0) => return Ok((state, JointLog { phase1, phase2: None })),
        TargetEpochs::Fixed(n) => StopRule::Fixed(n),
        TargetEpochs::Convergence => StopRule::Patience,
    };
    let (state, phase2) = run_phase(
        state,
        Phase {
            number: 2,
            train: target_only,
            dev,
            vocab,
            hp,
            policy,
            rule,
        },
    )?;
    Ok((
        state,
        JointLog {
            phase1,
            phase2: Some(phase2),
        },
    ))
}
