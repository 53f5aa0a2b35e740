use std::fs;
use std::path::{Path, PathBuf};

use candle_core::Tensor;
use image::imageops::{self, FilterType};
use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{io_at, Error, Result};
use crate::nn::{self, Conv, Params};
use crate::segmentation::SquarePatch;

use super::{EmbeddingVector, EMBEDDING_DIM, INPUT_SIDE};

pub const EMBEDDER_VERSION: &str = "fire-embed/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub input_side: u32,
    pub dim: usize,
    pub seed: u64,
    /// Unit-normalize outputs before any distance is taken.
    pub normalize: bool,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            input_side: INPUT_SIDE,
            dim: EMBEDDING_DIM,
            seed: 0,
            normalize: true,
        }
    }
}

/// Squeeze 1x1, then parallel 1x1 and 3x3 expands concatenated on channels.
struct Fire {
    squeeze: Conv,
    expand1: Conv,
    expand3: Conv,
}

impl Fire {
    fn new(
        params: &mut Params,
        name: &str,
        rng: &mut ChaCha8Rng,
        c_in: usize,
        squeeze: usize,
        expand: usize,
    ) -> Result<Self> {
        Ok(Self {
            squeeze: Conv::new(
                params,
                &format!("{name}.squeeze"),
                rng,
                (c_in, squeeze, 1),
                1,
                0,
            )?,
            expand1: Conv::new(
                params,
                &format!("{name}.expand1"),
                rng,
                (squeeze, expand, 1),
                1,
                0,
            )?,
            expand3: Conv::new(
                params,
                &format!("{name}.expand3"),
                rng,
                (squeeze, expand, 3),
                1,
                1,
            )?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let s = self.squeeze.forward(x)?.relu()?;
        let a = self.expand1.forward(&s)?.relu()?;
        let b = self.expand3.forward(&s)?.relu()?;
        Ok(Tensor::cat(&[&a, &b], 1)?)
    }
}

struct Net {
    stem: Conv,
    fires: Vec<Fire>,
    head: Conv,
}

impl Net {
    fn new(params: &mut Params, config: &EmbedderConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let r = &mut rng;
        let fires = vec![
            Fire::new(params, "fire2", r, 24, 8, 16)?,
            Fire::new(params, "fire3", r, 32, 8, 16)?,
            Fire::new(params, "fire4", r, 32, 16, 32)?,
            Fire::new(params, "fire5", r, 64, 16, 32)?,
            Fire::new(params, "fire6", r, 64, 24, 48)?,
        ];
        Ok(Self {
            stem: Conv::new(params, "stem", r, (3, 24, 3), 2, 1)?,
            fires,
            head: Conv::new(params, "head", r, (96, config.dim, 1), 1, 0)?,
        })
    }

    /// `(N, 3, S, S)` -> `(N, dim)`, before normalization.
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = self.stem.forward(x)?.relu()?.max_pool2d(2)?;
        h = self.fires[0].forward(&h)?;
        h = self.fires[1].forward(&h)?.max_pool2d(2)?;
        h = self.fires[2].forward(&h)?;
        h = self.fires[3].forward(&h)?.max_pool2d(2)?;
        h = self.fires[4].forward(&h)?;
        Ok(self.head.forward(&h)?.mean((2, 3))?)
    }
}

/// Fire-module network mapping an RGB square to an embedding.
pub struct EmbedderModel {
    config: EmbedderConfig,
    pub(super) params: Params,
    net: Net,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    kind: String,
    version: String,
    input_side: u32,
    config: EmbedderConfig,
}

/// Seed-deterministic untrained embedder.
pub fn build_embedder(input_side: u32, dim: usize, seed: u64) -> Result<EmbedderModel> {
    EmbedderModel::new(EmbedderConfig {
        input_side,
        dim,
        seed,
        normalize: true,
    })
}

impl EmbedderModel {
    pub fn new(config: EmbedderConfig) -> Result<Self> {
        if config.input_side < 32 {
            return Err(Error::InvalidInput(format!(
                "input side {} < 32",
                config.input_side
            )));
        }
        if config.dim < 2 {
            return Err(Error::InvalidInput(format!(
                "embedding dimension {} < 2",
                config.dim
            )));
        }
        let mut params = Params::default();
        let net = Net::new(&mut params, &config)?;
        Ok(Self {
            config,
            params,
            net,
        })
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.config
    }

    pub fn input_side(&self) -> u32 {
        self.config.input_side
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Forward pass on network-sized images, `(N, dim)` out.
    pub(crate) fn forward_images(&self, images: &[&RgbImage]) -> Result<Tensor> {
        let s = self.config.input_side;
        if let Some(bad) = images.iter().find(|i| i.dimensions() != (s, s)) {
            return Err(Error::InvalidInput(format!(
                "embedder expects {s}x{s} inputs, got {:?}",
                bad.dimensions()
            )));
        }
        let raw = self.net.forward(&nn::images_to_tensor(images)?)?;
        if self.config.normalize {
            nn::l2_normalize(&raw)
        } else {
            Ok(raw)
        }
    }

    pub(crate) fn to_vectors(&self, out: &Tensor) -> Result<Vec<EmbeddingVector>> {
        out.to_vec2::<f32>()?
            .into_iter()
            .map(|row| {
                let values: Vec<f64> = row.into_iter().map(f64::from).collect();
                if self.config.normalize {
                    EmbeddingVector::normalized(values)
                } else {
                    EmbeddingVector::new(values)
                }
            })
            .collect()
    }

    /// Deterministic inference: resize to the input side, no augmentation.
    pub fn embed(&self, patch: &SquarePatch) -> Result<EmbeddingVector> {
        Ok(self.embed_batch(&[patch])?.remove(0))
    }

    pub fn embed_batch(&self, patches: &[&SquarePatch]) -> Result<Vec<EmbeddingVector>> {
        let s = self.config.input_side;
        let mut out = Vec::with_capacity(patches.len());
        for chunk in patches.chunks(32) {
            let resized: Vec<RgbImage> = chunk
                .iter()
                .map(|p| imageops::resize(&p.pixels, s, s, FilterType::Triangle))
                .collect();
            let t = self.forward_images(&resized.iter().collect::<Vec<_>>())?;
            out.extend(self.to_vectors(&t)?);
        }
        Ok(out)
    }

    pub fn parameter_snapshot(&self) -> Result<Vec<f32>> {
        self.params.snapshot()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.params.save(path)?;
        let sidecar = Sidecar {
            kind: "embedder".into(),
            version: EMBEDDER_VERSION.into(),
            input_side: self.config.input_side,
            config: self.config.clone(),
        };
        let side = sidecar_path(path);
        fs::write(&side, serde_json::to_vec_pretty(&sidecar)?).map_err(io_at(&side))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side = sidecar_path(path);
        let sidecar: Sidecar = serde_json::from_slice(&fs::read(&side).map_err(io_at(&side))?)?;
        if sidecar.kind != "embedder" || sidecar.version != EMBEDDER_VERSION {
            return Err(Error::InvalidInput(format!(
                "{} holds a {} model version {}",
                path.display(),
                sidecar.kind,
                sidecar.version
            )));
        }
        let model = Self::new(sidecar.config)?;
        model.params.load(path)?;
        Ok(model)
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}
