//! Minimal layer and optimizer plumbing over `candle-core`, shared by the
//! segmenter and the embedder. Parameters are initialized from a seeded RNG so
//! model construction is reproducible.

use std::collections::HashMap;
use std::path::Path;

use candle_core::{backprop::GradStore, DType, Device, Tensor, Var};
use image::RgbImage;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named trainable tensors in registration order.
#[derive(Default)]
pub(crate) struct Params {
    named: Vec<(String, Var)>,
}

impl Params {
    fn register(&mut self, name: String, var: Var) -> Var {
        self.named.push((name, var.clone()));
        var
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.named.iter().map(|(_, v)| v)
    }

    pub fn to_map(&self) -> HashMap<String, Tensor> {
        self.named
            .iter()
            .map(|(n, v)| (n.clone(), v.as_tensor().clone()))
            .collect()
    }

    /// Overwrites every registered parameter from `map`; shapes must match.
    pub fn load_map(&self, map: &HashMap<String, Tensor>) -> Result<()> {
        for (name, var) in &self.named {
            let t = map
                .get(name)
                .ok_or_else(|| Error::InvalidInput(format!("model file lacks parameter {name}")))?;
            if t.dims() != var.dims() {
                return Err(Error::InvalidInput(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(DType::F32)?)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        candle_core::safetensors::save(&self.to_map(), path)?;
        Ok(())
    }

    pub fn load(&self, path: &Path) -> Result<()> {
        let map = candle_core::safetensors::load(path, &Device::Cpu)?;
        self.load_map(&map)
    }

    /// Flat copy of every parameter value, for equality checks.
    pub fn snapshot(&self) -> Result<Vec<f32>> {
        let mut out = Vec::new();
        for v in self.vars() {
            out.extend(v.as_tensor().flatten_all()?.to_vec1::<f32>()?);
        }
        Ok(out)
    }
}

pub(crate) struct Conv {
    weight: Var,
    bias: Var,
    stride: usize,
    padding: usize,
}

impl Conv {
    /// He-normal weights, zero bias.
    pub fn new(
        params: &mut Params,
        name: &str,
        rng: &mut impl Rng,
        (c_in, c_out, kernel): (usize, usize, usize),
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let fan_in = (c_in * kernel * kernel) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("finite std");
        let values: Vec<f32> = (0..c_out * c_in * kernel * kernel)
            .map(|_| normal.sample(rng) as f32)
            .collect();
        let w = Tensor::from_vec(values, (c_out, c_in, kernel, kernel), &Device::Cpu)?;
        let b = Tensor::zeros(c_out, DType::F32, &Device::Cpu)?;
        Ok(Self {
            weight: params.register(format!("{name}.weight"), Var::from_tensor(&w)?),
            bias: params.register(format!("{name}.bias"), Var::from_tensor(&b)?),
            stride,
            padding,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(self.weight.as_tensor(), self.padding, self.stride, 1, 1)?;
        let c = self.bias.dims()[0];
        Ok(y.broadcast_add(&self.bias.as_tensor().reshape((1, c, 1, 1))?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Sgd { momentum: f64, weight_decay: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

pub(crate) struct Optimizer {
    config: OptimizerConfig,
    state: Vec<(Var, Tensor, Tensor)>,
    step: i32,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &Params) -> Result<Self> {
        let state = params
            .vars()
            .map(|v| {
                let z = v.as_tensor().zeros_like()?;
                Ok((v.clone(), z.clone(), z))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            state,
            step: 0,
        })
    }

    pub fn step(&mut self, grads: &GradStore, lr: f64) -> Result<()> {
        self.step += 1;
        for (var, m, v) in &mut self.state {
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            let g = g.detach();
            match self.config {
                OptimizerConfig::Sgd {
                    momentum,
                    weight_decay,
                } => {
                    let w = var.as_tensor().detach();
                    let g = if weight_decay > 0.0 {
                        (g + w.affine(weight_decay, 0.0)?)?
                    } else {
                        g
                    };
                    *m = (m.affine(momentum, 0.0)? + g)?;
                    var.set(&(w - m.affine(lr, 0.0)?)?)?;
                }
                OptimizerConfig::Adam { beta1, beta2, eps } => {
                    *m = (m.affine(beta1, 0.0)? + g.affine(1.0 - beta1, 0.0)?)?;
                    *v = (v.affine(beta2, 0.0)? + g.sqr()?.affine(1.0 - beta2, 0.0)?)?;
                    let m_hat = m.affine(1.0 / (1.0 - beta1.powi(self.step)), 0.0)?;
                    let v_hat = v.affine(1.0 / (1.0 - beta2.powi(self.step)), 0.0)?;
                    let update = (m_hat / v_hat.sqrt()?.affine(1.0, eps)?)?;
                    var.set(&(var.as_tensor().detach() - update.affine(lr, 0.0)?)?)?;
                }
            }
        }
        Ok(())
    }
}

/// Packs images of equal size into an `(N, 3, H, W)` tensor, scaled to roughly unit range.
pub(crate) fn images_to_tensor(images: &[&RgbImage]) -> Result<Tensor> {
    let Some(first) = images.first() else {
        return Err(Error::InvalidInput("empty image batch".into()));
    };
    let (w, h) = first.dimensions();
    let plane = (w * h) as usize;
    let mut data = vec![0f32; images.len() * 3 * plane];
    for (n, img) in images.iter().enumerate() {
        if img.dimensions() != (w, h) {
            return Err(Error::InvalidInput(
                "images in a batch must share dimensions".into(),
            ));
        }
        let base = n * 3 * plane;
        for (i, p) in img.pixels().enumerate() {
            for c in 0..3 {
                data[base + c * plane + i] = (p[c] as f32 / 255.0 - 0.5) * 4.0;
            }
        }
    }
    Ok(Tensor::from_vec(
        data,
        (images.len(), 3, h as usize, w as usize),
        &Device::Cpu,
    )?)
}

/// Numerically stable `log(1 + exp(z))` built from ops that all have gradients.
pub(crate) fn softplus(z: &Tensor) -> Result<Tensor> {
    let pos = z.relu()?;
    let abs = (z.relu()? + z.neg()?.relu()?)?;
    Ok((pos + abs.neg()?.exp()?.affine(1.0, 1.0)?.log()?)?)
}

pub(crate) fn sigmoid(z: &Tensor) -> Result<Tensor> {
    Ok(z.neg()?.exp()?.affine(1.0, 1.0)?.recip()?)
}

/// Row-wise L2 normalization of an `(N, D)` tensor.
pub(crate) fn l2_normalize(x: &Tensor) -> Result<Tensor> {
    let norm = x.sqr()?.sum_keepdim(1)?.affine(1.0, 1e-12)?.sqrt()?;
    Ok(x.broadcast_div(&norm)?)
}
