use std::fs;
use std::path::Path;

use candle_core::{Device, Tensor};
use image::imageops::{self, FilterType};
use image::{GrayImage, RgbImage};
use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{io_at, Error, Result};
use crate::mask::{BinaryMask, ProbabilityMask};
use crate::nn::{self, Conv, Optimizer, OptimizerConfig, Params};

pub const SEGMENTER_VERSION: &str = "fcn-unet-small/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    /// Side of the square grid the network runs on; masks are upsampled back.
    pub input_side: u32,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            input_side: 64,
            epochs: 30,
            batch_size: 8,
            learning_rate: 3e-3,
            seed: 0,
        }
    }
}

/// Small encoder-decoder with skip connections producing one logit per pixel.
struct Net {
    enc1: Conv,
    enc2: Conv,
    enc3: Conv,
    enc4: Conv,
    bottleneck: Conv,
    dec3: Conv,
    dec2: Conv,
    dec1: Conv,
    head: Conv,
}

impl Net {
    fn new(params: &mut Params, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = &mut rng;
        Ok(Self {
            enc1: Conv::new(params, "enc1", r, (3, 12, 3), 1, 1)?,
            enc2: Conv::new(params, "enc2", r, (12, 24, 3), 2, 1)?,
            enc3: Conv::new(params, "enc3", r, (24, 32, 3), 2, 1)?,
            enc4: Conv::new(params, "enc4", r, (32, 32, 3), 1, 1)?,
            bottleneck: Conv::new(params, "bottleneck", r, (32, 32, 3), 2, 1)?,
            dec3: Conv::new(params, "dec3", r, (64, 24, 3), 1, 1)?,
            dec2: Conv::new(params, "dec2", r, (48, 16, 3), 1, 1)?,
            dec1: Conv::new(params, "dec1", r, (28, 8, 3), 1, 1)?,
            head: Conv::new(params, "head", r, (8, 1, 1), 1, 0)?,
        })
    }

    /// `(N, 3, S, S)` -> `(N, S, S)` logits. `S` must be a multiple of 8.
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let e1 = self.enc1.forward(x)?.relu()?;
        let e2 = self.enc2.forward(&e1)?.relu()?;
        let e3 = self.enc3.forward(&e2)?.relu()?;
        let e4 = self.enc4.forward(&e3)?.relu()?;
        let b = self.bottleneck.forward(&e4)?.relu()?;
        let up = |t: &Tensor, like: &Tensor| {
            let (_, _, h, w) = like.dims4()?;
            t.upsample_nearest2d(h, w)
        };
        let d3 = self
            .dec3
            .forward(&Tensor::cat(&[&up(&b, &e4)?, &e4], 1)?)?
            .relu()?;
        let d2 = self
            .dec2
            .forward(&Tensor::cat(&[&up(&d3, &e2)?, &e2], 1)?)?
            .relu()?;
        let d1 = self
            .dec1
            .forward(&Tensor::cat(&[&up(&d2, &e1)?, &e1], 1)?)?
            .relu()?;
        Ok(self.head.forward(&d1)?.squeeze(1)?)
    }
}

/// Per-pixel CS/background classifier.
pub struct SegmenterModel {
    config: SegmenterConfig,
    params: Params,
    net: Net,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    kind: String,
    version: String,
    input_side: u32,
    config: SegmenterConfig,
}

impl SegmenterModel {
    /// Untrained model with seed-deterministic weights.
    pub fn new(config: SegmenterConfig) -> Result<Self> {
        if config.input_side < 16 || config.input_side % 8 != 0 {
            return Err(Error::InvalidInput(format!(
                "segmenter input side {} must be a multiple of 8 and at least 16",
                config.input_side
            )));
        }
        let mut params = Params::default();
        let net = Net::new(&mut params, config.seed)?;
        Ok(Self {
            config,
            params,
            net,
        })
    }

    pub fn config(&self) -> &SegmenterConfig {
        &self.config
    }

    fn input(&self, images: &[&RgbImage]) -> Result<Tensor> {
        let s = self.config.input_side;
        let resized: Vec<RgbImage> = images
            .iter()
            .map(|img| imageops::resize(*img, s, s, FilterType::Triangle))
            .collect();
        nn::images_to_tensor(&resized.iter().collect::<Vec<_>>())
    }

    /// CS probability per pixel, same size as `image`.
    pub fn predict(&self, image: &RgbImage) -> Result<ProbabilityMask> {
        let (w, h) = image.dimensions();
        if w < 8 || h < 8 {
            return Err(Error::InvalidInput(format!(
                "image {w}x{h} too small to segment"
            )));
        }
        let logits = self.net.forward(&self.input(&[image])?)?;
        let probs = nn::sigmoid(&logits)?.squeeze(0)?.to_vec2::<f32>()?;
        let grid: Vec<f32> = probs.into_iter().flatten().collect();
        upsample_bilinear(&grid, self.config.input_side, w, h)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.params.save(path)?;
        let sidecar = Sidecar {
            kind: "segmenter".into(),
            version: SEGMENTER_VERSION.into(),
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
        if sidecar.kind != "segmenter" || sidecar.version != SEGMENTER_VERSION {
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

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Bilinear upsampling of a square `side × side` grid to `w × h` (pixel-center aligned).
fn upsample_bilinear(grid: &[f32], side: u32, w: u32, h: u32) -> Result<ProbabilityMask> {
    let s = side as usize;
    let sample = |gx: f32, gy: f32| {
        let gx = gx.clamp(0.0, (s - 1) as f32);
        let gy = gy.clamp(0.0, (s - 1) as f32);
        let (x0, y0) = (gx.floor() as usize, gy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(s - 1), (y0 + 1).min(s - 1));
        let (fx, fy) = (gx - x0 as f32, gy - y0 as f32);
        let top = grid[y0 * s + x0] * (1.0 - fx) + grid[y0 * s + x1] * fx;
        let bottom = grid[y1 * s + x0] * (1.0 - fx) + grid[y1 * s + x1] * fx;
        (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
    };
    let (sx, sy) = (side as f32 / w as f32, side as f32 / h as f32);
    ProbabilityMask::from_fn(w, h, |x, y| {
        sample((x as f32 + 0.5) * sx - 0.5, (y as f32 + 0.5) * sy - 0.5)
    })
}

/// Area-averaged soft target on the network grid.
fn target_grid(mask: &BinaryMask, side: u32) -> Vec<f32> {
    let small: GrayImage = imageops::resize(&mask.to_luma(), side, side, FilterType::Triangle);
    small.pixels().map(|p| p[0] as f32 / 255.0).collect()
}

/// Trains a segmenter on `(image, ground-truth mask)` pairs.
///
/// With `epochs == 0` the freshly initialized model is returned.
pub fn train_segmenter(
    train_set: &[(&RgbImage, &BinaryMask)],
    config: SegmenterConfig,
) -> Result<SegmenterModel> {
    if train_set.is_empty() {
        return Err(Error::InvalidInput(
            "segmenter training set is empty".into(),
        ));
    }
    for (img, mask) in train_set {
        if img.dimensions() != mask.dimensions() {
            return Err(Error::InvalidInput(format!(
                "image {:?} and mask {:?} differ in size",
                img.dimensions(),
                mask.dimensions()
            )));
        }
    }
    let model = SegmenterModel::new(config.clone())?;
    if config.epochs == 0 {
        return Ok(model);
    }
    let side = config.input_side;
    let inputs: Vec<Tensor> = train_set
        .iter()
        .map(|(img, _)| model.input(&[*img]))
        .collect::<Result<_>>()?;
    let targets: Vec<Tensor> = train_set
        .iter()
        .map(|(_, m)| {
            Ok(Tensor::from_vec(
                target_grid(m, side),
                (1, side as usize, side as usize),
                &Device::Cpu,
            )?)
        })
        .collect::<Result<_>>()?;

    let adam = OptimizerConfig::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
    let mut opt = Optimizer::new(adam, &model.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e6);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let x = Tensor::cat(&chunk.iter().map(|&i| &inputs[i]).collect::<Vec<_>>(), 0)?;
            let y = Tensor::cat(&chunk.iter().map(|&i| &targets[i]).collect::<Vec<_>>(), 0)?;
            let z = model.net.forward(&x)?;
            // Binary cross-entropy with logits.
            let loss = (nn::softplus(&z)? - (z * &y)?)?.mean_all()?;
            total += loss.to_scalar::<f32>()? as f64 * chunk.len() as f64;
            opt.step(&loss.backward()?, config.learning_rate)?;
        }
        debug!(
            "segmenter epoch {epoch}: bce {:.4}",
            total / train_set.len() as f64
        );
    }
    Ok(model)
}
