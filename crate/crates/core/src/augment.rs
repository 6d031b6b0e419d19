//! SpecAugment masking and speed-factor corpus expansion.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Manifest, Utterance};
use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};

/// Value written into masked cells. Features are mean-normalized before
/// masking, so zero is the per-bin mean.
pub const MASK_FILL: f64 = 0.0;

const SPEED_TAG: &str = "#sp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub sp_enabled: bool,
    pub sp_factors: Vec<f64>,
    pub sa_enabled: bool,
    pub max_time_mask: usize,
    pub max_freq_mask: usize,
    pub n_time_masks: usize,
    pub n_freq_masks: usize,
    pub seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            sp_enabled: false,
            sp_factors: vec![0.9, 1.0, 1.1],
            sa_enabled: false,
            max_time_mask: 30,
            max_freq_mask: 30,
            n_time_masks: 2,
            n_freq_masks: 2,
            seed: 0,
        }
    }
}

impl AugmentPolicy {
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.sp_factors.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
            return Err(Error::config("sp_factors", format!("factor {f} is not positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Time,
    Frequency,
}

/// One sampled mask: cells `[start, start + width)` along `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mask {
    pub axis: Axis,
    pub start: usize,
    pub width: usize,
}

/// FNV-1a, used to derive stable RNG streams from string keys.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Independent RNG stream for one utterance in one epoch.
pub fn stream_rng(seed: u64, utterance_id: &str, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(utterance_id.as_bytes()));
    rng.set_stream(epoch);
    rng
}

pub fn sample_masks<R: Rng + ?Sized>(
    frames: usize,
    bins: usize,
    p: &AugmentPolicy,
    rng: &mut R,
) -> Vec<Mask> {
    let mut masks = Vec::with_capacity(p.n_time_masks + p.n_freq_masks);
    for (axis, count, max, len) in [
        (Axis::Time, p.n_time_masks, p.max_time_mask, frames),
        (Axis::Frequency, p.n_freq_masks, p.max_freq_mask, bins),
    ] {
        for _ in 0..count {
            let width = rng.random_range(0..=max.min(len));
            let start = rng.random_range(0..=len - width);
            masks.push(Mask { axis, start, width });
        }
    }
    masks
}

pub fn apply_masks(f: &FeatureMatrix, masks: &[Mask]) -> FeatureMatrix {
    let mut out = f.clone();
    for m in masks {
        for i in m.start..m.start + m.width {
            match m.axis {
                Axis::Time => (0..f.bins()).for_each(|b| out.set(i, b, MASK_FILL)),
                Axis::Frequency => (0..f.frames()).for_each(|t| out.set(t, i, MASK_FILL)),
            }
        }
    }
    out
}

/// Applies `n_time_masks` time masks and `n_freq_masks` frequency masks.
/// Returns the masked features and the sampled masks.
pub fn spec_augment_with_masks<R: Rng + ?Sized>(
    f: &FeatureMatrix,
    p: &AugmentPolicy,
    rng: &mut R,
) -> (FeatureMatrix, Vec<Mask>) {
    let masks = sample_masks(f.frames(), f.bins(), p, rng);
    (apply_masks(f, &masks), masks)
}

pub fn spec_augment<R: Rng + ?Sized>(f: &FeatureMatrix, p: &AugmentPolicy, rng: &mut R) -> FeatureMatrix {
    spec_augment_with_masks(f, p, rng).0
}

fn speed_id(id: &str, factor: f64) -> String {
    format!("{id}{SPEED_TAG}{factor:?}")
}

/// Splits an expanded id such as `utt7#sp0.9` into `("utt7", 0.9)`.
pub fn parse_speed_id(id: &str) -> Option<(&str, f64)> {
    let (base, factor) = id.rsplit_once(SPEED_TAG)?;
    let factor: f64 = factor.parse().ok()?;
    (factor > 0.0).then_some((base, factor))
}

/// One copy of every utterance per speed factor. Durations are rescaled by
/// `1 / factor`; all copies keep the original audio reference and the
/// resampling is applied when features are extracted.
pub fn expand_with_speed(m: &Manifest, p: &AugmentPolicy) -> Result<Manifest> {
    p.validate()?;
    if !p.sp_enabled {
        return Ok(m.clone());
    }
    if p.sp_factors.is_empty() {
        return Err(Error::config("sp_factors", "no speed factors given"));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(m.len() * p.sp_factors.len());
    for u in &m.utterances {
        for &factor in &p.sp_factors {
            let id = speed_id(&u.id, factor);
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            out.push(Utterance {
                id,
                duration_sec: u.duration_sec / factor,
                ..u.clone()
            });
        }
    }
    Manifest::new(m.split, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    fn features(frames: usize, bins: usize) -> FeatureMatrix {
        FeatureMatrix::new(
            frames,
            bins,
            (0..frames * bins).map(|i| 1.0 + i as f64 * 0.01).collect(),
        )
    }

    fn sa_policy() -> AugmentPolicy {
        AugmentPolicy {
            sa_enabled: true,
            ..AugmentPolicy::default()
        }
    }

    fn manifest(n: usize) -> Manifest {
        Manifest::new(
            Split::Train,
            (0..n)
                .map(|i| Utterance {
                    id: format!("u{i}"),
                    audio_path: format!("u{i}.wav"),
                    duration_sec: 9.0,
                    src_lang: "bho".into(),
                    tgt_lang: "hi".into(),
                    src_text: String::new(),
                    tgt_text: "घर".into(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn short_inputs_clamp_widths() {
        let p = sa_policy();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..500 {
            for m in sample_masks(20, 80, &p, &mut rng) {
                if m.axis == Axis::Time {
                    assert!(m.width <= 20);
                    assert!(m.start + m.width <= 20);
                }
            }
        }
        // degenerate dims
        assert!(sample_masks(0, 0, &p, &mut rng).iter().all(|m| m.width == 0));
    }

    #[test]
    fn zero_masks_is_identity() {
        let p = AugmentPolicy {
            n_time_masks: 0,
            n_freq_masks: 0,
            ..sa_policy()
        };
        let f = features(50, 80);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(spec_augment(&f, &p, &mut rng), f);
    }

    #[test]
    fn fixed_seed_repeats_masks() {
        let f = features(100, 80);
        let p = sa_policy();
        let cells = |seed| {
            let out = spec_augment(&f, &p, &mut stream_rng(seed, "utt", 4));
            (0..100 * 80)
                .filter(|&i| out.data()[i] != f.data()[i])
                .collect::<Vec<_>>()
        };
        assert_eq!(cells(9), cells(9));
        assert_ne!(
            sample_masks(100, 80, &p, &mut stream_rng(9, "utt", 4)),
            sample_masks(100, 80, &p, &mut stream_rng(9, "utt", 5))
        );
    }

    #[test]
    fn expansion_counts() {
        let p = AugmentPolicy {
            sp_enabled: true,
            ..AugmentPolicy::default()
        };
        let out = expand_with_speed(&manifest(10_171), &p).unwrap();
        assert_eq!(out.len(), 30_513);
        assert_eq!(out.utterances[0].id, "u0#sp0.9");
        assert_eq!(out.utterances[1].id, "u0#sp1.0");
        assert!((out.utterances[0].duration_sec - 10.0).abs() < 1e-12);
        assert_eq!(out.utterances[1].audio_path, "u0.wav");
        assert_eq!(parse_speed_id("u0#sp0.9"), Some(("u0", 0.9)));
        assert_eq!(parse_speed_id("u0"), None);
    }

    #[test]
    fn unit_factor_only_renames() {
        let m = manifest(5);
        let p = AugmentPolicy {
            sp_enabled: true,
            sp_factors: vec![1.0],
            ..AugmentPolicy::default()
        };
        let out = expand_with_speed(&m, &p).unwrap();
        for (a, b) in m.utterances.iter().zip(&out.utterances) {
            assert_eq!(b.id, format!("{}#sp1.0", a.id));
            assert_eq!(Utterance { id: a.id.clone(), ..b.clone() }, *a);
        }
    }

    #[test]
    fn duplicate_factor_is_rejected() {
        let p = AugmentPolicy {
            sp_enabled: true,
            sp_factors: vec![0.9, 0.9],
            ..AugmentPolicy::default()
        };
        assert!(matches!(expand_with_speed(&manifest(1), &p), Err(Error::DuplicateId(_))));
        let bad = AugmentPolicy {
            sp_enabled: true,
            sp_factors: vec![0.0],
            ..AugmentPolicy::default()
        };
        assert!(expand_with_speed(&manifest(1), &bad).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn only_mask_rectangles_change(
                frames in 0usize..120, seed in 0u64..10_000,
                n_t in 0usize..4, n_f in 0usize..4,
            ) {
                let p = AugmentPolicy { n_time_masks: n_t, n_freq_masks: n_f, ..sa_policy() };
                let f = features(frames, 80);
                let (out, masks) = spec_augment_with_masks(&f, &p, &mut ChaCha8Rng::seed_from_u64(seed));
                let mut masked = 0usize;
                for t in 0..frames {
                    for b in 0..80 {
                        let inside = masks.iter().any(|m| match m.axis {
                            Axis::Time => (m.start..m.start + m.width).contains(&t),
                            Axis::Frequency => (m.start..m.start + m.width).contains(&b),
                        });
                        if inside {
                            masked += 1;
                            prop_assert_eq!(out.get(t, b), MASK_FILL);
                        } else {
                            prop_assert_eq!(out.get(t, b).to_bits(), f.get(t, b).to_bits());
                        }
                    }
                }
                let bound = n_t * p.max_time_mask * 80 + n_f * p.max_freq_mask * frames;
                prop_assert!(masked <= bound);
            }

            #[test]
            fn expansion_scales_hours(n in 1usize..50) {
                let m = manifest(n);
                let p = AugmentPolicy { sp_enabled: true, ..AugmentPolicy::default() };
                let out = expand_with_speed(&m, &p).unwrap();
                prop_assert_eq!(out.len(), 3 * n);
                let hours = 9.0 * n as f64 / 3600.0;
                for factor in [0.9, 1.0, 1.1] {
                    let h: f64 = out.utterances.iter()
                        .filter(|u| parse_speed_id(&u.id).unwrap().1 == factor)
                        .map(|u| u.duration_sec / 3600.0)
                        .sum();
                    prop_assert!((h - hours / factor).abs() < 1e-9);
                }
            }
        }
    }
}
