//! Experiment configuration, stored as TOML. Every numeric constant of the
//! pipeline lives here with its default; command-line flags override it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{GridConfig, LogGaborConfig, PithConfig, DEFAULT_MAX_SHIFT};
use crate::embedding::{EmbedderConfig, TrainSchedule};
use crate::error::{io_at, Error, Result};
use crate::evaluation::Regime;
use crate::segmentation::{SegmenterConfig, DEFAULT_BORDER, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub datasets: Vec<DatasetEntry>,
    pub segmentation: SegmentationSettings,
    pub embedding: EmbeddingSettings,
    pub baselines: BaselineSettings,
    pub evaluation: EvaluationSettings,
}

/// A named dataset and where its files live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub tag: String,
    /// Root holding `<tag>/manifest.json`.
    #[serde(default)]
    pub root: Option<PathBuf>,
    /// Output directory of `segment` for this dataset.
    #[serde(default)]
    pub patches: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationSettings {
    pub model: SegmenterConfig,
    pub border: u32,
    pub default_threshold: f32,
    /// Per dataset tag; tags not listed use `default_threshold`.
    pub thresholds: BTreeMap<String, f32>,
    /// `segment` fails when more than this fraction of acquisitions fails.
    pub max_failure_rate: f64,
}

impl Default for SegmentationSettings {
    fn default() -> Self {
        Self {
            model: SegmenterConfig::default(),
            border: DEFAULT_BORDER,
            default_threshold: DEFAULT_THRESHOLD,
            thresholds: [("FH".to_string(), 0.25), ("FL".to_string(), 0.25)].into(),
            max_failure_rate: 0.1,
        }
    }
}

impl SegmentationSettings {
    pub fn threshold_for(&self, tag: &str) -> f32 {
        self.thresholds
            .get(tag)
            .copied()
            .unwrap_or(self.default_threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub model: EmbedderConfig,
    pub schedule: TrainSchedule,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            model: EmbedderConfig::default(),
            schedule: TrainSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSettings {
    pub pith: PithConfig,
    pub polar_bands: usize,
    pub polar_angles: usize,
    pub log_gabor: LogGaborConfig,
    pub max_shift: usize,
    pub grid: GridConfig,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            pith: PithConfig::default(),
            polar_bands: 8,
            polar_angles: 512,
            log_gabor: LogGaborConfig::default(),
            max_shift: DEFAULT_MAX_SHIFT,
            grid: GridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    pub k: usize,
    pub fold_seed: u64,
    pub regime: Regime,
    /// Dataset tags (or patch directories) added to every training split.
    pub extra_train: Vec<String>,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            k: 4,
            fold_seed: 0,
            regime: Regime::SqNet,
            extra_train: Vec::new(),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            datasets: Vec::new(),
            segmentation: SegmentationSettings::default(),
            embedding: EmbeddingSettings::default(),
            baselines: BaselineSettings::default(),
            evaluation: EvaluationSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(io_at(path))?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let seg = &self.segmentation;
        for (tag, t) in std::iter::once(("default", &seg.default_threshold))
            .chain(seg.thresholds.iter().map(|(k, v)| (k.as_str(), v)))
        {
            if !(*t > 0.0 && *t < 1.0) {
                return bad(format!("threshold for {tag} must lie in (0, 1), got {t}"));
            }
        }
        if !(0.0..=1.0).contains(&seg.max_failure_rate) {
            return bad("max_failure_rate must lie in [0, 1]".into());
        }
        self.embedding
            .schedule
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.embedding.model.input_side < 32 || self.embedding.model.dim < 2 {
            return bad("embedder needs input_side >= 32 and dim >= 2".into());
        }
        let b = &self.baselines;
        if b.polar_bands == 0 || b.polar_angles < 8 {
            return bad("polar unwrap needs >= 1 band and >= 8 angles".into());
        }
        b.log_gabor
            .validate(b.polar_angles)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.evaluation.k < 2 {
            return bad("cross-validation needs k >= 2".into());
        }
        Ok(())
    }

    pub fn dataset(&self, tag: &str) -> Option<&DatasetEntry> {
        self.datasets.iter().find(|d| d.tag == tag)
    }
}
