//! Flat TOML run configuration shared by the CLI subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentPolicy;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::HyperParams;

/// Every key is optional; unset keys take the library defaults. Unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub lr_peak: f64,
    pub label_smoothing: f64,
    pub batch_size: usize,
    pub warmup_steps: u64,
    pub patience: usize,
    pub beam_size: usize,
    pub max_epochs: usize,
    pub seed: u64,

    pub sp: bool,
    pub sa: bool,
    pub sp_factors: Vec<f64>,
    pub max_time_mask: usize,
    pub max_freq_mask: usize,
    pub n_time_masks: usize,
    pub n_freq_masks: usize,

    pub d_model: usize,
    pub n_heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub ff_dim: usize,
    pub conv_subsample_factor: usize,
    pub dropout: f64,

    /// Sentence-BLEU below which `analyze` flags a pair.
    pub low_bleu_threshold: f64,
}

impl Default for Config {
    fn default() -> Self {
        let hp = HyperParams::default();
        let ap = AugmentPolicy {
            sa_enabled: true,
            ..AugmentPolicy::default()
        };
        let mc = ModelConfig::default();
        Config {
            lr_peak: hp.lr_peak,
            label_smoothing: hp.label_smoothing,
            batch_size: hp.batch_size,
            warmup_steps: hp.warmup_steps,
            patience: hp.patience,
            beam_size: hp.beam_size,
            max_epochs: hp.max_epochs,
            seed: hp.seed,
            sp: ap.sp_enabled,
            sa: ap.sa_enabled,
            sp_factors: ap.sp_factors,
            max_time_mask: ap.max_time_mask,
            max_freq_mask: ap.max_freq_mask,
            n_time_masks: ap.n_time_masks,
            n_freq_masks: ap.n_freq_masks,
            d_model: mc.d_model,
            n_heads: mc.n_heads,
            enc_layers: mc.enc_layers,
            dec_layers: mc.dec_layers,
            ff_dim: mc.ff_dim,
            conv_subsample_factor: mc.conv_subsample_factor,
            dropout: mc.dropout,
            low_bleu_threshold: crate::analysis::LOW_BLEU_THRESHOLD,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field"))
                .unwrap_or("config")
                .to_string();
            Error::config(field, msg)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Config::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn hyper(&self) -> HyperParams {
        HyperParams {
            lr_peak: self.lr_peak,
            label_smoothing: self.label_smoothing,
            batch_size: self.batch_size,
            warmup_steps: self.warmup_steps,
            patience: self.patience,
            beam_size: self.beam_size,
            max_epochs: self.max_epochs,
            seed: self.seed,
        }
    }

    pub fn policy(&self) -> AugmentPolicy {
        AugmentPolicy {
            sp_enabled: self.sp,
            sp_factors: self.sp_factors.clone(),
            sa_enabled: self.sa,
            max_time_mask: self.max_time_mask,
            max_freq_mask: self.max_freq_mask,
            n_time_masks: self.n_time_masks,
            n_freq_masks: self.n_freq_masks,
            seed: self.seed,
        }
    }

    pub fn model(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            d_model: self.d_model,
            n_heads: self.n_heads,
            enc_layers: self.enc_layers,
            dec_layers: self.dec_layers,
            ff_dim: self.ff_dim,
            conv_subsample_factor: self.conv_subsample_factor,
            dropout: self.dropout,
            vocab_size,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper().validate()?;
        self.policy().validate()?;
        self.model(ModelConfig::default().vocab_size).validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.hyper(), HyperParams::default());
        let c = Config::from_toml("lr_peak = 1e-5\nbatch_size = 10\nsa = false\nd_model = 32\n").unwrap();
        assert_eq!(c.hyper().lr_peak, 1e-5);
        assert_eq!(c.hyper().batch_size, 10);
        assert!(!c.policy().sa_enabled);
        assert_eq!(c.model(70).d_model, 32);
        assert_eq!(c.model(70).vocab_size, 70);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        match Config::from_toml("learning_rate = 1.0") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "learning_rate"),
            other => panic!("{other:?}"),
        }
        assert!(Config::from_toml("batch_size = \"x\"").is_err());
        let c = Config::from_toml("label_smoothing = 1.0").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "label_smoothing"));
    }
}
