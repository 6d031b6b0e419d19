//! Audio front-end: WAV ingestion, resampling-based speed perturbation,
//! log-mel features and per-utterance mean/variance normalization.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const SAMPLE_RATE_HZ: u32 = 16_000;
pub const WINDOW_SAMPLES: usize = 400;
pub const HOP_SAMPLES: usize = 160;
pub const FRAME_LENGTH_MS: u32 = 25;
pub const FRAME_SHIFT_MS: u32 = 10;
pub const N_FFT: usize = 512;
pub const N_MELS: usize = 80;
pub const MEL_FMIN_HZ: f64 = 20.0;
pub const MEL_FMAX_HZ: f64 = 7_600.0;
pub const LOG_FLOOR: f64 = 1e-10;
pub const CMVN_VAR_FLOOR: f64 = 1e-10;

/// Half-width of the resampling kernel; the kernel spans `2 * RESAMPLE_HALF_TAPS` input samples.
const RESAMPLE_HALF_TAPS: i64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>) -> Self {
        Waveform {
            samples,
            sample_rate_hz: SAMPLE_RATE_HZ,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Row-major `frames × bins` grid of log-mel (or normalized) values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    bins: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(frames: usize, bins: usize, data: Vec<f64>) -> Self {
        assert_eq!(frames * bins, data.len(), "feature shape mismatch");
        FeatureMatrix { frames, bins, data }
    }

    pub fn zeros(frames: usize, bins: usize) -> Self {
        FeatureMatrix::new(frames, bins, vec![0.0; frames * bins])
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.data[t * self.bins + f]
    }

    pub fn set(&mut self, t: usize, f: usize, v: f64) {
        self.data[t * self.bins + f] = v;
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes a RIFF/WAVE byte buffer. Only 16-bit PCM, mono, 16 kHz is accepted.
pub fn parse_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::CorruptFile("missing RIFF/WAVE header".into()));
    }
    let mut pos = 12;
    let mut fmt_seen = false;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(Error::CorruptFile("truncated fmt chunk".into()));
                }
                let format = read_u16(bytes, body);
                let channels = read_u16(bytes, body + 2);
                let rate = read_u32(bytes, body + 4);
                let bits = read_u16(bytes, body + 14);
                if format != 1 {
                    return Err(Error::UnsupportedFormat {
                        field: "format",
                        detail: format!("format tag {format}, expected PCM (1)"),
                    });
                }
                if channels != 1 {
                    return Err(Error::UnsupportedFormat {
                        field: "channels",
                        detail: format!("{channels} channels, expected 1"),
                    });
                }
                if rate != SAMPLE_RATE_HZ {
                    return Err(Error::UnsupportedFormat {
                        field: "sample_rate",
                        detail: format!("{rate} Hz, expected {SAMPLE_RATE_HZ}"),
                    });
                }
                if bits != 16 {
                    return Err(Error::UnsupportedFormat {
                        field: "bits_per_sample",
                        detail: format!("{bits} bits, expected 16"),
                    });
                }
                fmt_seen = true;
            }
            b"data" => {
                if !fmt_seen {
                    return Err(Error::CorruptFile("data chunk before fmt chunk".into()));
                }
                if body + size > bytes.len() || !size.is_multiple_of(2) {
                    return Err(Error::CorruptFile(format!(
                        "data chunk declares {size} bytes, {} available",
                        bytes.len().saturating_sub(body)
                    )));
                }
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32_768.0)
                    .collect();
                return Ok(Waveform::new(samples));
            }
            _ => {}
        }
        pos = body + size + (size & 1);
    }
    Err(Error::CorruptFile("no data chunk".into()))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes)
}

pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = (w.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &w.samples {
        let q = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_wav(w)).map_err(|e| Error::io(path, e))
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Speed perturbation by bandlimited resampling of the time axis.
///
/// The output is played back at the original rate, so a factor below one
/// lengthens the signal (and lowers its pitch). Output length is
/// `round(n / factor)`; factor 1.0 returns the input unchanged.
pub fn speed_perturb(w: &Waveform, factor: f64) -> Result<Waveform> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::Domain(format!("speed factor must be positive, got {factor}")));
    }
    if factor == 1.0 {
        return Ok(w.clone());
    }
    let n = w.samples.len();
    let n_out = (n as f64 / factor).round() as usize;
    // Compressing time raises frequencies, so low-pass at the new Nyquist.
    let cutoff = (1.0 / factor).min(1.0);
    let x = &w.samples;
    let mut out = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let t = j as f64 * factor;
        let base = t.floor() as i64;
        let mut acc = 0.0;
        let mut norm = 0.0;
        for k in (base - RESAMPLE_HALF_TAPS + 1)..=(base + RESAMPLE_HALF_TAPS) {
            let d = t - k as f64;
            let window = 0.5 + 0.5 * (PI * d / RESAMPLE_HALF_TAPS as f64).cos();
            let h = cutoff * sinc(cutoff * d) * window;
            norm += h;
            if k >= 0 && (k as usize) < n {
                acc += h * x[k as usize];
            }
        }
        let y = if norm.abs() > 1e-12 { acc / norm } else { acc };
        out.push(y.clamp(-1.0, 1.0));
    }
    Ok(Waveform {
        samples: out,
        sample_rate_hz: w.sample_rate_hz,
    })
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

struct MelFrontend {
    window: Vec<f64>,
    /// `N_MELS` rows of `(first_bin, weights)`.
    filters: Vec<(usize, Vec<f64>)>,
    fft: Arc<dyn Fft<f64>>,
}

impl MelFrontend {
    fn new() -> Self {
        let window = (0..WINDOW_SAMPLES)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / WINDOW_SAMPLES as f64).cos())
            .collect();
        let n_bins = N_FFT / 2 + 1;
        let bin_hz = SAMPLE_RATE_HZ as f64 / N_FFT as f64;
        let lo = hz_to_mel(MEL_FMIN_HZ);
        let hi = hz_to_mel(MEL_FMAX_HZ);
        let edges: Vec<f64> = (0..N_MELS + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (N_MELS + 1) as f64))
            .collect();
        let filters = (0..N_MELS)
            .map(|m| {
                let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
                let mut first = None;
                let mut weights = Vec::new();
                for k in 0..n_bins {
                    let f = k as f64 * bin_hz;
                    let w = if f > left && f <= center {
                        (f - left) / (center - left)
                    } else if f > center && f < right {
                        (right - f) / (right - center)
                    } else {
                        0.0
                    };
                    if w > 0.0 {
                        first.get_or_insert(k);
                        weights.push(w);
                    } else if first.is_some() {
                        break;
                    }
                }
                (first.unwrap_or(0), weights)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(N_FFT);
        MelFrontend {
            window,
            filters,
            fft,
        }
    }

    fn shared() -> &'static MelFrontend {
        static FRONTEND: OnceLock<MelFrontend> = OnceLock::new();
        FRONTEND.get_or_init(MelFrontend::new)
    }
}

/// Number of analysis frames produced for `n_samples` input samples.
pub fn frame_count(n_samples: usize) -> usize {
    if n_samples < WINDOW_SAMPLES {
        0
    } else {
        1 + (n_samples - WINDOW_SAMPLES) / HOP_SAMPLES
    }
}

/// 80-bin log-mel spectrogram: 25 ms Hann window, 10 ms hop, 512-point FFT,
/// power spectrum, `ln(energy + 1e-10)`.
pub fn log_mel(w: &Waveform) -> Result<FeatureMatrix> {
    let n = w.samples.len();
    if n < WINDOW_SAMPLES {
        return Err(Error::TooShort {
            min: WINDOW_SAMPLES,
            got: n,
            unit: "samples",
        });
    }
    let fe = MelFrontend::shared();
    let frames = frame_count(n);
    let mut data = Vec::with_capacity(frames * N_MELS);
    let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
    let mut scratch = vec![Complex::new(0.0, 0.0); fe.fft.get_inplace_scratch_len()];
    let mut power = vec![0.0; N_FFT / 2 + 1];
    for t in 0..frames {
        let start = t * HOP_SAMPLES;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < WINDOW_SAMPLES {
                Complex::new(w.samples[start + i] * fe.window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fe.fft.process_with_scratch(&mut buf, &mut scratch);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for (first, weights) in &fe.filters {
            let energy: f64 = weights
                .iter()
                .zip(&power[*first..])
                .map(|(w, p)| w * p)
                .sum();
            data.push((energy + LOG_FLOOR).ln());
        }
    }
    Ok(FeatureMatrix::new(frames, N_MELS, data))
}

/// Per-utterance, per-bin normalization to zero mean and unit variance.
pub fn cmvn(f: &FeatureMatrix) -> Result<FeatureMatrix> {
    let (t, nb) = (f.frames, f.bins);
    if t < 2 {
        return Err(Error::TooShort {
            min: 2,
            got: t,
            unit: "frames",
        });
    }
    let mut out = f.clone();
    for b in 0..nb {
        let mean = (0..t).map(|i| f.get(i, b)).sum::<f64>() / t as f64;
        let var = (0..t).map(|i| (f.get(i, b) - mean).powi(2)).sum::<f64>() / t as f64;
        let scale = 1.0 / var.max(CMVN_VAR_FLOOR).sqrt();
        for i in 0..t {
            out.set(i, b, (f.get(i, b) - mean) * scale);
        }
    }
    Ok(out)
}

/// Little-endian dump: `T: u32`, `F: u32`, then `T*F` row-major `f32` values.
pub fn encode_features(f: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * f.data.len());
    out.extend_from_slice(&(f.frames as u32).to_le_bytes());
    out.extend_from_slice(&(f.bins as u32).to_le_bytes());
    for &v in &f.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < 8 {
        return Err(Error::CorruptFile("feature dump shorter than header".into()));
    }
    let frames = read_u32(bytes, 0) as usize;
    let bins = read_u32(bytes, 4) as usize;
    let body = &bytes[8..];
    if body.len() != frames * bins * 4 {
        return Err(Error::CorruptFile(format!(
            "feature dump declares {frames}x{bins} values, holds {} bytes",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(FeatureMatrix::new(frames, bins, data))
}

pub fn write_features(path: impl AsRef<Path>, f: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_features(f)).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes)
}

/// Pure tone generator used by the synthetic corpora and tests.
pub fn tone(freq_hz: f64, amplitude: f64, n_samples: usize) -> Waveform {
    let sr = SAMPLE_RATE_HZ as f64;
    Waveform::new(
        (0..n_samples)
            .map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / sr).sin())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wav_bytes(channels: u16, rate: u32, bits: u16, samples: &[i16]) -> Vec<u8> {
        let data_len = (samples.len() * 2) as u32;
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&(36 + data_len).to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&rate.to_le_bytes());
        b.extend_from_slice(&(rate * channels as u32 * bits as u32 / 8).to_le_bytes());
        b.extend_from_slice(&(channels * bits / 8).to_le_bytes());
        b.extend_from_slice(&bits.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&data_len.to_le_bytes());
        for s in samples {
            b.extend_from_slice(&s.to_le_bytes());
        }
        b
    }

    #[test]
    fn silence_and_scaling() {
        let w = parse_wav(&wav_bytes(1, 16_000, 16, &vec![0; 16_000])).unwrap();
        assert_eq!(w.len(), 16_000);
        assert!(w.samples.iter().all(|&s| s == 0.0));

        let w = parse_wav(&wav_bytes(1, 16_000, 16, &[32_767, -32_768])).unwrap();
        assert_eq!(w.samples[0], 32_767.0 / 32_768.0);
        assert!((w.samples[0] - 0.999_969).abs() < 1e-6);
        assert_eq!(w.samples[1], -1.0);
    }

    #[test]
    fn unsupported_formats_name_the_field() {
        let field = |b: Vec<u8>| match parse_wav(&b) {
            Err(Error::UnsupportedFormat { field, .. }) => field,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(field(wav_bytes(2, 16_000, 16, &[0, 0])), "channels");
        assert_eq!(field(wav_bytes(1, 8_000, 16, &[0])), "sample_rate");
        assert_eq!(field(wav_bytes(1, 16_000, 8, &[0])), "bits_per_sample");
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let mut b = wav_bytes(1, 16_000, 16, &[1, 2, 3, 4]);
        b.truncate(b.len() - 3);
        assert!(matches!(parse_wav(&b), Err(Error::CorruptFile(_))));
        assert!(matches!(parse_wav(b"RIFF"), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn wav_write_read() {
        let w = Waveform::new(vec![0.0, 0.5, -0.25, 32_767.0 / 32_768.0]);
        let back = parse_wav(&encode_wav(&w)).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn speed_perturb_lengths() {
        let w = Waveform::new(vec![0.1; 16_000]);
        assert_eq!(speed_perturb(&w, 0.9).unwrap().len(), 17_778);
        assert_eq!(speed_perturb(&w, 1.1).unwrap().len(), 14_545);
        assert_eq!(speed_perturb(&w, 1.0).unwrap(), w);
        assert!(matches!(speed_perturb(&w, 0.0), Err(Error::Domain(_))));
        assert!(matches!(speed_perturb(&w, -1.1), Err(Error::Domain(_))));
    }

    #[test]
    fn speed_perturb_keeps_dc_level() {
        let w = Waveform::new(vec![0.3; 4_000]);
        let out = speed_perturb(&w, 1.1).unwrap();
        for &s in &out.samples[20..out.len() - 20] {
            assert!((s - 0.3).abs() < 1e-9, "{s}");
        }
    }

    fn dominant_bin(f: &FeatureMatrix) -> usize {
        let mut mean = vec![0.0; f.bins()];
        for t in 0..f.frames() {
            for (m, v) in mean.iter_mut().zip(f.row(t)) {
                *m += v;
            }
        }
        (0..mean.len())
            .max_by(|&a, &b| mean[a].total_cmp(&mean[b]))
            .unwrap()
    }

    #[test]
    fn slowing_down_lowers_pitch() {
        let w = tone(440.0, 0.5, 16_000);
        let before = dominant_bin(&log_mel(&w).unwrap());
        let after = dominant_bin(&log_mel(&speed_perturb(&w, 0.9).unwrap()).unwrap());
        let target = dominant_bin(&log_mel(&tone(396.0, 0.5, 16_000)).unwrap());
        assert!(after < before, "{after} !< {before}");
        assert_eq!(after, target);
    }

    #[test]
    fn frame_count_formula() {
        let f = log_mel(&Waveform::new(vec![0.0; 16_000])).unwrap();
        assert_eq!(f.frames(), 98);
        assert_eq!(f.bins(), N_MELS);
        assert_eq!(frame_count(400), 1);
        assert_eq!(frame_count(559), 1);
        assert_eq!(frame_count(560), 2);
    }

    #[test]
    fn silence_hits_the_floor() {
        let f = log_mel(&Waveform::new(vec![0.0; 1_000])).unwrap();
        assert!(f.data().iter().all(|&v| v == LOG_FLOOR.ln()));
    }

    #[test]
    fn too_short_input() {
        match log_mel(&Waveform::new(vec![0.0; 399])) {
            Err(Error::TooShort { min, .. }) => assert_eq!(min, 400),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn doubling_amplitude_adds_ln4() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..4_000).map(|_| rng.random_range(-0.4..0.4)).collect();
        let a = log_mel(&Waveform::new(x.clone())).unwrap();
        let b = log_mel(&Waveform::new(x.iter().map(|v| 2.0 * v).collect())).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((v - u - 4f64.ln()).abs() < 1e-6, "{u} {v}");
        }
    }

    #[test]
    fn log_mel_is_deterministic() {
        let w = tone(1_000.0, 0.3, 3_000);
        assert_eq!(log_mel(&w).unwrap(), log_mel(&w).unwrap());
    }

    #[test]
    fn cmvn_cases() {
        let c = cmvn(&FeatureMatrix::new(3, 2, vec![5.0; 6])).unwrap();
        assert!(c.data().iter().all(|&v| v == 0.0));

        let two = cmvn(&FeatureMatrix::new(2, 2, vec![0.0, 0.0, 2.0, 2.0])).unwrap();
        assert_eq!(two.data(), &[-1.0, -1.0, 1.0, 1.0]);

        assert!(matches!(
            cmvn(&FeatureMatrix::zeros(1, 80)),
            Err(Error::TooShort { min: 2, .. })
        ));
    }

    #[test]
    fn feature_dump_layout() {
        let f = FeatureMatrix::new(2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, -0.5]);
        let bytes = encode_features(&f);
        assert_eq!(&bytes[0..8], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(bytes.len(), 8 + 24);
        assert_eq!(&bytes[8 + 20..], &(-0.5f32).to_le_bytes());
        assert_eq!(decode_features(&bytes).unwrap(), f);
        assert!(decode_features(&bytes[..10]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn perturbed_length_within_one_sample(n in 1usize..20_000, fast in prop::bool::ANY) {
                let factor = if fast { 1.1 } else { 0.9 };
                let out = speed_perturb(&Waveform::new(vec![0.0; n]), factor).unwrap();
                prop_assert!((out.len() as f64 - n as f64 / factor).abs() <= 1.0);
            }

            #[test]
            fn cmvn_normalizes_and_is_idempotent(
                vals in prop::collection::vec(-20.0f64..20.0, 10 * 4)
            ) {
                let f = FeatureMatrix::new(10, 4, vals);
                let column_moments = |m: &FeatureMatrix, b: usize| {
                    let mean = (0..10).map(|t| m.get(t, b)).sum::<f64>() / 10.0;
                    let var = (0..10).map(|t| (m.get(t, b) - mean).powi(2)).sum::<f64>() / 10.0;
                    (mean, var)
                };
                prop_assume!((0..4).all(|b| column_moments(&f, b).1 > 1e-6));
                let once = cmvn(&f).unwrap();
                for b in 0..4 {
                    let (mean, var) = column_moments(&once, b);
                    prop_assert!(mean.abs() < 1e-6);
                    prop_assert!((var - 1.0).abs() < 1e-6);
                }
                let twice = cmvn(&once).unwrap();
                for (a, b) in once.data().iter().zip(twice.data()) {
                    prop_assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }
}
