//! Run configuration: one TOML document with `[model]`, `[train]`, `[data]`
//! and `[metrics]` tables. Every key is optional; unknown keys are errors.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{DiversityConfig, ExtractorConfig};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// How shapes on disk become training clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Surface samples per shape.
    pub n_points: usize,
    /// Center and scale each cloud into the unit sphere.
    pub normalize: bool,
    /// Subdirectories holding family 1 and family 2 when the data directory
    /// has no manifest.
    pub family_dirs: [String; 2],
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { n_points: 2500, normalize: true, family_dirs: ["family1".into(), "family2".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub extractor: ExtractorConfig,
    pub diversity_samples: usize,
    pub pairs_per_sample: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let d = DiversityConfig::default();
        Self { extractor: ExtractorConfig::default(), diversity_samples: d.n_samples, pairs_per_sample: d.pairs_per_sample }
    }
}

impl MetricsConfig {
    pub fn diversity(&self, seed: u64) -> DiversityConfig {
        DiversityConfig { n_samples: self.diversity_samples, pairs_per_sample: self.pairs_per_sample, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub metrics: MetricsConfig,
}

impl RunConfig {
    /// Reduced dimensions and a 30-epoch schedule for single-machine runs.
    pub fn desk() -> Self {
        Self {
            model: ModelConfig::desk(),
            train: TrainConfig::desk(),
            data: DataConfig { n_points: 256, ..DataConfig::default() },
            metrics: MetricsConfig { extractor: ExtractorConfig::desk(), ..MetricsConfig::default() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.metrics.extractor.validate()?;
        if self.data.n_points == 0 {
            return Err(Error::Config("data.n_points must be at least 1".into()));
        }
        if self.metrics.diversity_samples == 0 || self.metrics.pairs_per_sample == 0 {
            return Err(Error::Config("diversity counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self = parse_toml(text, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Deserializes TOML, reporting failures as `path:line: message`.
pub fn parse_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1).unwrap_or(0);
        Error::Parse { path: path.to_path_buf(), line, message: e.message().to_string() }
    })
}
