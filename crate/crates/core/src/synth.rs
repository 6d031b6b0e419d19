//! Synthetic character-level corpora: each target word is rendered as a
//! pure tone, so the mapping from audio to text is learnable by a tiny model.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Manifest, Split, Utterance};
use crate::dsp::{tone, write_wav, Waveform, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

pub const WORDS: [&str; 6] = ["घर", "पानी", "नदी", "आम", "दस", "जल"];
const BASE_FREQS_HZ: [f64; 6] = [300.0, 520.0, 800.0, 1150.0, 1600.0, 2200.0];
const WORD_SECONDS: f64 = 0.25;
const GAP_SECONDS: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_utterances: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub src_lang: String,
    pub tgt_lang: String,
    /// Multiplies every tone frequency; distinct values act as distinct
    /// source "languages" with the same targets.
    pub pitch_scale: f64,
    pub id_prefix: String,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_utterances: 20,
            min_words: 4,
            max_words: 5,
            src_lang: "bho".into(),
            tgt_lang: "hi".into(),
            pitch_scale: 1.0,
            id_prefix: "syn".into(),
            seed: 0,
        }
    }
}

pub fn render(words: &[usize], pitch_scale: f64) -> Waveform {
    let rate = SAMPLE_RATE_HZ as f64;
    let gap = vec![0.0; (GAP_SECONDS * rate) as usize];
    let mut samples = gap.clone();
    for &w in words {
        let t = tone(BASE_FREQS_HZ[w] * pitch_scale, 0.5, (WORD_SECONDS * rate) as usize);
        samples.extend(t.samples);
        samples.extend(&gap);
    }
    Waveform::new(samples)
}

/// Writes `<id>.wav` files into `dir` and returns the manifest rows, with
/// audio paths relative to `dir`.
pub fn generate(dir: &Path, spec: &SynthSpec) -> Result<Manifest> {
    if spec.min_words == 0 || spec.min_words > spec.max_words {
        return Err(Error::config("min_words", "need 1 <= min_words <= max_words"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(spec.n_utterances);
    for i in 0..spec.n_utterances {
        let n = rng.random_range(spec.min_words..=spec.max_words);
        let words: Vec<usize> = (0..n).map(|_| rng.random_range(0..WORDS.len())).collect();
        let wav = render(&words, spec.pitch_scale);
        let id = format!("{}{i:03}", spec.id_prefix);
        let file = format!("{id}.wav");
        write_wav(dir.join(&file), &wav)?;
        let text = words.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" ");
        rows.push(Utterance {
            id,
            audio_path: file,
            duration_sec: wav.duration_sec(),
            src_lang: spec.src_lang.clone(),
            tgt_lang: spec.tgt_lang.clone(),
            src_text: String::new(),
            tgt_text: text,
        });
    }
    Manifest::new(Split::Train, rows)
}
