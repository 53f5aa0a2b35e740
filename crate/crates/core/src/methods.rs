//! The three verification methods wired for cross-validation.

use log::info;

use crate::baselines::{
    circular_grid_compare, circular_grid_features, estimate_pith_with, iris_compare,
    log_gabor_encode, polar_unwrap, prealign_cm, CircularGridTemplate, GridConfig, IrisTemplate,
    LogGaborConfig, PithConfig, PithEstimate, PolarGeometry,
};
use crate::config::{BaselineSettings, EmbeddingSettings};
use crate::embedding::{train_embedder, EmbedderModel, EmbeddingVector, EpochStats, TrainSchedule};
use crate::error::{Error, Result};
use crate::evaluation::VerificationMethod;
use crate::segmentation::SegmentedSample;

/// Triplet-trained embedder; a fresh network is trained for every fold.
pub struct EmbedderMethod {
    pub settings: EmbeddingSettings,
    /// Base seed; fold `f` trains with `seed + f`.
    pub seed: u64,
    model: Option<EmbedderModel>,
    frozen: bool,
    pub history: Vec<Vec<EpochStats>>,
}

impl EmbedderMethod {
    pub fn new(settings: EmbeddingSettings, seed: u64) -> Self {
        Self {
            settings,
            seed,
            model: None,
            frozen: false,
            history: Vec::new(),
        }
    }

    /// Uses an already trained model; `fit` becomes a no-op.
    pub fn pretrained(model: EmbedderModel) -> Self {
        Self {
            settings: EmbeddingSettings {
                model: model.config().clone(),
                schedule: TrainSchedule::default(),
            },
            seed: 0,
            model: Some(model),
            frozen: true,
            history: Vec::new(),
        }
    }

    pub fn model(&self) -> Option<&EmbedderModel> {
        self.model.as_ref()
    }

    fn trained(&self) -> Result<&EmbedderModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("embedder used before training".into()))
    }
}

impl VerificationMethod for EmbedderMethod {
    type Template = EmbeddingVector;

    fn name(&self) -> String {
        "embedder".into()
    }

    fn learns(&self) -> bool {
        !self.frozen
    }

    fn fit(&mut self, fold: usize, train: &[SegmentedSample]) -> Result<()> {
        if self.frozen {
            return Ok(());
        }
        let mut config = self.settings.model.clone();
        config.seed = self.seed.wrapping_add(fold as u64);
        let model = EmbedderModel::new(config)?;
        let set: Vec<_> = train.iter().map(|s| (&s.patch, s.id.label())).collect();
        info!("training embedder for fold {fold} on {} patches", set.len());
        let (model, stats) = train_embedder(
            model,
            &set,
            &self.settings.schedule,
            self.seed.wrapping_add(fold as u64),
        )?;
        self.history.push(stats);
        self.model = Some(model);
        Ok(())
    }

    fn extract(&self, sample: &SegmentedSample) -> Result<EmbeddingVector> {
        self.trained()?.embed(&sample.patch)
    }

    fn extract_all(&self, samples: &[&SegmentedSample]) -> Vec<Result<EmbeddingVector>> {
        let model = match self.trained() {
            Ok(m) => m,
            Err(e) => {
                return samples
                    .iter()
                    .map(|_| Err(Error::InvalidInput(e.to_string())))
                    .collect()
            }
        };
        let patches: Vec<_> = samples.iter().map(|s| &s.patch).collect();
        match model.embed_batch(&patches) {
            Ok(v) => v.into_iter().map(Ok).collect(),
            Err(e) => samples
                .iter()
                .map(|_| Err(Error::InvalidInput(e.to_string())))
                .collect(),
        }
    }

    fn distance(&self, a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
        a.distance(b)
    }
}

/// Pith estimate, CM pre-alignment, polar unwrap and Log-Gabor code.
#[derive(Debug, Clone)]
pub struct IrisMethod {
    pub pith: PithConfig,
    pub bands: usize,
    pub angular_positions: usize,
    pub log_gabor: LogGaborConfig,
    pub max_shift: usize,
}

impl IrisMethod {
    pub fn new(settings: &BaselineSettings) -> Self {
        Self {
            pith: settings.pith.clone(),
            bands: settings.polar_bands,
            angular_positions: settings.polar_angles,
            log_gabor: settings.log_gabor.clone(),
            max_shift: settings.max_shift,
        }
    }

    pub fn template(&self, sample: &SegmentedSample) -> Result<(PithEstimate, IrisTemplate)> {
        let pith = estimate_pith_with(&sample.patch, &sample.mask, &self.pith)?;
        let geometry = PolarGeometry {
            bands: self.bands,
            angular_positions: self.angular_positions,
            reference_deg: prealign_cm(&sample.mask, &pith)?,
        };
        let polar = polar_unwrap(&sample.patch, &sample.mask, &pith, &geometry)?;
        Ok((pith, log_gabor_encode(&polar, &self.log_gabor)?))
    }
}

impl VerificationMethod for IrisMethod {
    type Template = IrisTemplate;

    fn name(&self) -> String {
        "iris".into()
    }

    fn extract(&self, sample: &SegmentedSample) -> Result<IrisTemplate> {
        Ok(self.template(sample)?.1)
    }

    fn distance(&self, a: &IrisTemplate, b: &IrisTemplate) -> Result<f64> {
        iris_compare(a, b, self.max_shift)
    }
}

/// Pith estimate and circular-grid descriptors compared over all cell shifts.
#[derive(Debug, Clone)]
pub struct GridMethod {
    pub pith: PithConfig,
    pub grid: GridConfig,
}

impl GridMethod {
    pub fn new(settings: &BaselineSettings) -> Self {
        Self {
            pith: settings.pith.clone(),
            grid: settings.grid.clone(),
        }
    }

    pub fn template(
        &self,
        sample: &SegmentedSample,
    ) -> Result<(PithEstimate, CircularGridTemplate)> {
        let pith = estimate_pith_with(&sample.patch, &sample.mask, &self.pith)?;
        let t = circular_grid_features(&sample.patch, &sample.mask, &pith, &self.grid, 0.0)?;
        Ok((pith, t))
    }
}

impl VerificationMethod for GridMethod {
    type Template = CircularGridTemplate;

    fn name(&self) -> String {
        "circular-grid".into()
    }

    fn extract(&self, sample: &SegmentedSample) -> Result<CircularGridTemplate> {
        Ok(self.template(sample)?.1)
    }

    fn distance(&self, a: &CircularGridTemplate, b: &CircularGridTemplate) -> Result<f64> {
        circular_grid_compare(a, b)
    }
}
