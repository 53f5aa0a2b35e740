use std::collections::BTreeMap;

use candle_core::{Device, Tensor};
use image::RgbImage;
use log::debug;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Optimizer, OptimizerConfig};
use crate::sample::ClassLabel;
use crate::segmentation::SquarePatch;

use super::{augment, mine_hard_triplets, triplet_loss_with_grad, AugmentGeometry, EmbedderModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// SGD with `momentum` and `weight_decay`.
    #[default]
    Sgd,
    /// Adam with the usual betas; `momentum` and `weight_decay` are unused.
    Adam,
}

/// Step-decay training schedule plus batch composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub base_lr: f64,
    /// The learning rate is divided by this every `decay_period_epochs`.
    pub decay_factor: f64,
    pub decay_period_epochs: usize,
    /// Classes per batch.
    pub batch_classes: usize,
    /// Samples per class per batch.
    pub samples_per_class: usize,
    pub margin: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epochs: 400,
            base_lr: 0.001,
            decay_factor: 10.0,
            decay_period_epochs: 120,
            batch_classes: 8,
            samples_per_class: 4,
            margin: 0.2,
            optimizer: OptimizerKind::Sgd,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("train schedule: {m}")));
        if !(self.base_lr > 0.0) {
            return bad("base_lr must be positive");
        }
        if !(self.decay_factor > 1.0) {
            return bad("decay_factor must exceed 1");
        }
        if self.decay_period_epochs == 0 {
            return bad("decay_period_epochs must be at least 1");
        }
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if self.batch_classes < 2 || self.samples_per_class < 2 {
            return bad("batches need at least 2 classes with 2 samples each");
        }
        Ok(())
    }

    /// `base_lr / decay_factor^floor(epoch / decay_period_epochs)`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.base_lr
            / self
                .decay_factor
                .powi((epoch / self.decay_period_epochs) as i32)
    }

    pub fn lr_trace(&self) -> Vec<f64> {
        (0..self.epochs).map(|e| self.learning_rate(e)).collect()
    }

    /// Same shape of schedule compressed to `epochs` (decay every 30% of the run).
    pub fn compressed(&self, epochs: usize) -> Self {
        let period = ((epochs as f64) * 120.0 / 400.0).ceil().max(1.0) as usize;
        Self {
            epochs,
            decay_period_epochs: period,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub batches: usize,
    pub active_triplets: usize,
    pub mean_loss: f64,
}

/// Trains with online mining of all active triplets per class-balanced batch.
///
/// Every epoch visits each class once. A batch holds up to `batch_classes`
/// classes with `samples_per_class` augmented samples each (drawn with
/// repetition when a class is small); the step follows the mean loss over the
/// mined triplets.
pub fn train_embedder(
    model: EmbedderModel,
    train_set: &[(&SquarePatch, ClassLabel)],
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<(EmbedderModel, Vec<EpochStats>)> {
    schedule.validate()?;
    let mut by_class: BTreeMap<&ClassLabel, Vec<usize>> = BTreeMap::new();
    for (i, (_, label)) in train_set.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least 2 classes, got {}",
            by_class.len()
        )));
    }
    let mut stats = Vec::with_capacity(schedule.epochs);
    if schedule.epochs == 0 {
        return Ok((model, stats));
    }

    let classes: Vec<&ClassLabel> = by_class.keys().copied().collect();
    let per_batch = schedule.batch_classes.min(classes.len());
    let geometry = AugmentGeometry::for_input(model.input_side());
    let opt_config = match schedule.optimizer {
        OptimizerKind::Sgd => OptimizerConfig::Sgd {
            momentum: schedule.momentum,
            weight_decay: schedule.weight_decay,
        },
        OptimizerKind::Adam => OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
    };
    let mut opt = Optimizer::new(opt_config, &model.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for epoch in 0..schedule.epochs {
        let lr = schedule.learning_rate(epoch);
        let mut order = classes.clone();
        order.shuffle(&mut rng);
        let (mut batches, mut active, mut loss_sum) = (0, 0, 0.0);

        for chunk in order.chunks(per_batch) {
            let mut batch_classes = chunk.to_vec();
            while batch_classes.len() < 2 {
                let extra = *classes.choose(&mut rng).expect("at least two classes");
                if !batch_classes.contains(&extra) {
                    batch_classes.push(extra);
                }
            }
            let mut members = Vec::new();
            for class in &batch_classes {
                let mut pool = by_class[class].clone();
                pool.shuffle(&mut rng);
                members.extend(
                    pool.iter()
                        .cycle()
                        .take(schedule.samples_per_class)
                        .copied(),
                );
            }
            let images: Vec<RgbImage> = members
                .iter()
                .map(|&i| augment(train_set[i].0, geometry, rng.next_u64()))
                .collect();
            let labels: Vec<ClassLabel> = members.iter().map(|&i| train_set[i].1.clone()).collect();

            let out = model.forward_images(&images.iter().collect::<Vec<_>>())?;
            let vectors = model.to_vectors(&out)?;
            let triplets = mine_hard_triplets(&vectors, &labels, schedule.margin)?;
            batches += 1;
            if triplets.is_empty() {
                continue;
            }

            let dim = model.dim();
            let scale = 1.0 / triplets.len() as f64;
            let mut grad = vec![0f32; members.len() * dim];
            let mut loss = 0.0;
            for t in &triplets {
                let (l, g) = triplet_loss_with_grad(
                    vectors[t.anchor].values(),
                    vectors[t.positive].values(),
                    vectors[t.negative].values(),
                    schedule.margin,
                )?;
                loss += l * scale;
                for (row, gv) in [
                    (t.anchor, &g.anchor),
                    (t.positive, &g.positive),
                    (t.negative, &g.negative),
                ] {
                    for (slot, v) in grad[row * dim..(row + 1) * dim].iter_mut().zip(gv) {
                        *slot += (v * scale) as f32;
                    }
                }
            }
            // d(sum(out * G))/d(theta) is the chain-rule gradient of the mean triplet loss.
            let g = Tensor::from_vec(grad, (members.len(), dim), &Device::Cpu)?;
            let surrogate = (out * g)?.sum_all()?;
            opt.step(&surrogate.backward()?, lr)?;
            active += triplets.len();
            loss_sum += loss;
        }

        let s = EpochStats {
            epoch,
            learning_rate: lr,
            batches,
            active_triplets: active,
            mean_loss: if batches > 0 {
                loss_sum / batches as f64
            } else {
                0.0
            },
        };
        debug!(
            "embedder epoch {epoch}: lr {lr:e} loss {:.4} active {}",
            s.mean_loss, s.active_triplets
        );
        stats.push(s);
    }
    Ok((model, stats))
}
