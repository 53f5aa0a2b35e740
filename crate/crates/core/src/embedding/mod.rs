//! Triplet-loss identity embeddings for square CS patches.
//!
//! A compact fire-module network maps a patch to a unit-norm vector; training
//! mines every active triplet within class-balanced batches and never uses the
//! opposite end of the anchor's log as a negative.

mod augment;
mod loss;
mod mining;
mod model;
mod store;
mod train;

pub use augment::{augment, augment_with, AugmentGeometry, AugmentParams};
pub use loss::{triplet_loss, triplet_loss_with_grad, TripletGrad};
pub use mining::{mine_hard_triplets, Triplet};
pub use model::{build_embedder, EmbedderConfig, EmbedderModel, EMBEDDER_VERSION};
pub use store::{EmbeddingRow, EmbeddingTable};
pub use train::{train_embedder, EpochStats, OptimizerKind, TrainSchedule};

pub use crate::sample::ClassLabel;

use crate::error::{Error, Result};

/// Default embedding dimension.
pub const EMBEDDING_DIM: usize = 256;
/// Default network input side.
pub const INPUT_SIDE: u32 = 224;

/// Identity descriptor compared by Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "embedding must be nonempty and finite".into(),
            ));
        }
        Ok(Self(values))
    }

    /// Scales to unit Euclidean norm.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput(
                "cannot normalize a zero or non-finite embedding".into(),
            ));
        }
        Self::new(values.into_iter().map(|v| v / norm).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &EmbeddingVector) -> Result<f64> {
        Ok(squared_distance(&self.0, &other.0)?.sqrt())
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}
