//! Pipeline configuration, stored as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthgen::{Perturbation, SynthConfig};

pub const CLASS_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub image: ImageConfig,
    pub latent: LatentConfig,
    pub corpus: CorpusConfig,
    pub training: TrainingConfig,
    pub matcher: MatcherConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageConfig {
    pub height: usize,
    pub width: usize,
}

/// Shape the salted latent is reshaped to before projection; `cols` is the
/// matrix dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatentConfig {
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub subjects_per_class: usize,
    pub impressions_per_subject: usize,
    pub ridge_frequency: f64,
    pub ridge_frequency_jitter: f64,
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub ae_epochs: usize,
    pub decoder_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub heldout_fraction: f64,
    /// Width of the decoder's fixed random feature layer.
    pub decoder_features: usize,
    /// Root mean square the trained encoder's latent codes are scaled to.
    pub latent_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatcherConfig {
    /// Fused score at or above which a probe is accepted.
    pub decision_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Maximum number of impostor pairs scored per scenario.
    pub impostor_cap: usize,
}

/// Locations relative to the output root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub models: PathBuf,
    pub matrices: PathBuf,
    pub store: PathBuf,
    pub reports: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            image: ImageConfig::default(),
            latent: LatentConfig::default(),
            corpus: CorpusConfig::default(),
            training: TrainingConfig::default(),
            matcher: MatcherConfig::default(),
            eval: EvalConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self { height: 200, width: 136 }
    }
}

impl Default for LatentConfig {
    fn default() -> Self {
        Self { rows: 100, cols: 136 }
    }
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            subjects_per_class: 25,
            impressions_per_subject: 4,
            ridge_frequency: 0.1,
            ridge_frequency_jitter: 0.05,
            perturbation: Perturbation::default(),
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            ae_epochs: 8,
            decoder_epochs: 24,
            batch_size: 16,
            learning_rate: 1e-3,
            heldout_fraction: 0.2,
            decoder_features: 128,
            latent_rms: 0.55,
        }
    }
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self { decision_threshold: 0.66 }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { impostor_cap: 20_000 }
    }
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            corpus: "corpus".into(),
            models: "models".into(),
            matrices: "matrices".into(),
            store: "store".into(),
            reports: "reports".into(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::transform::io::write(path.as_ref(), self.to_toml().as_bytes())
    }

    /// Length of the encoder output for this image size.
    pub fn latent_len(&self) -> usize {
        (self.image.height / 2) * (self.image.width / 2) * 2
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = (self.image.height, self.image.width);
        if h < 32 || w < 32 || h % 2 != 0 || w % 2 != 0 {
            return Err(Error::Config(format!("image {h}x{w} must be even and at least 32x32")));
        }
        if self.latent.rows * self.latent.cols != self.latent_len() {
            return Err(Error::Config(format!(
                "latent reshape {}x{} does not hold the {} encoder outputs",
                self.latent.rows,
                self.latent.cols,
                self.latent_len()
            )));
        }
        if self.corpus.impressions_per_subject == 0 {
            return Err(Error::Config("impressions_per_subject must be >= 1".into()));
        }
        if !(0.05..=0.25).contains(&self.corpus.ridge_frequency) {
            return Err(Error::Config("ridge_frequency must lie in [0.05, 0.25]".into()));
        }
        if self.training.batch_size == 0 || self.training.decoder_features == 0 {
            return Err(Error::Config("batch_size and decoder_features must be >= 1".into()));
        }
        if !(self.training.latent_rms > 0.0) {
            return Err(Error::Config("latent_rms must be positive".into()));
        }
        if !(self.training.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.training.heldout_fraction) {
            return Err(Error::Config("heldout_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            height: self.image.height,
            width: self.image.width,
            subjects_per_class: self.corpus.subjects_per_class,
            impressions_per_subject: self.corpus.impressions_per_subject,
            ridge_frequency: self.corpus.ridge_frequency,
            ridge_frequency_jitter: self.corpus.ridge_frequency_jitter,
            perturbation: self.corpus.perturbation,
            seed: self.seed,
        }
    }
}
