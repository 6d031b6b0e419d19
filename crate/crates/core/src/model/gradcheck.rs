//! Finite-difference verification of the backward pass.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::tape::BackwardFault;
use super::{forward_pass, ModelState};
use crate::error::Result;
use crate::training::loss::{label_smoothed_loss, Batch};

pub const STEP: f64 = 1e-5;
pub const MIN_SAMPLES: usize = 200;
/// Floor of the relative-error denominator, so coordinates whose gradient is
/// essentially zero are judged on absolute error.
pub const DENOM_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub label_smoothing: f64,
    pub samples: usize,
    pub seed: u64,
    #[doc(hidden)]
    pub fault: Option<BackwardFault>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            label_smoothing: 0.1,
            samples: MIN_SAMPLES,
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub passed: bool,
    pub coordinates: Vec<CoordinateCheck>,
}

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(DENOM_FLOOR)
}

/// Compares analytic gradients of the label-smoothed batch loss against
/// central differences on a random sample of parameter coordinates.
pub fn grad_check(state: &ModelState, batch: &Batch, tolerance: f64) -> Result<GradCheckReport> {
    grad_check_with(state, batch, tolerance, &GradCheckOptions::default())
}

pub fn grad_check_with(
    state: &ModelState,
    batch: &Batch,
    tolerance: f64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let eps = opts.label_smoothing;
    let analytic = analytic_grads(state, batch, eps, opts.fault)?;

    let offsets: Vec<usize> = state
        .params
        .iter()
        .scan(0, |acc, p| {
            let start = *acc;
            *acc += p.len();
            Some(start)
        })
        .collect();
    let total = state.n_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut picks = sample(&mut rng, total, opts.samples.max(MIN_SAMPLES).min(total)).into_vec();
    picks.sort_unstable();

    let mut probe = state.clone();
    let mut coordinates = Vec::with_capacity(picks.len());
    for flat in picks {
        let p = offsets.partition_point(|&o| o <= flat) - 1;
        let i = flat - offsets[p];
        let original = probe.params[p].data[i];
        probe.params[p].data[i] = original + STEP;
        let up = crate::training::loss::batch_loss(&probe, batch, eps)?;
        probe.params[p].data[i] = original - STEP;
        let down = crate::training::loss::batch_loss(&probe, batch, eps)?;
        probe.params[p].data[i] = original;
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[p].data[i];
        coordinates.push(CoordinateCheck {
            param: state.specs[p].name.clone(),
            index: i,
            analytic: a,
            numeric,
            rel_error: rel_error(a, numeric),
        });
    }
    let max_rel_error = coordinates.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        tolerance,
        max_rel_error,
        passed: max_rel_error < tolerance,
        coordinates,
    })
}

fn analytic_grads(
    state: &ModelState,
    batch: &Batch,
    eps: f64,
    fault: Option<BackwardFault>,
) -> Result<Vec<super::tape::Tensor>> {
    let prefixes: Vec<Vec<u32>> = batch.targets.iter().map(|t| t[..t.len() - 1].to_vec()).collect();
    let gold: Vec<&[u32]> = batch.targets.iter().map(|t| &t[1..]).collect();
    let mut pass = forward_pass(state, &batch.features, &prefixes, None)?;
    if let Some(f) = fault {
        pass.inject_fault(f);
    }
    let (_, logit_grads) = label_smoothed_loss(&pass.logits(), &gold, eps, super::vocab::PAD)?;
    Ok(pass.backward(logit_grads, state))
}
