//! Wood log end recognition from cross-section images.
//!
//! The pipeline segments the cross-section (CS), cuts a square black-framed
//! patch, and either embeds it with a triplet-trained network or extracts a
//! traditional iris- or fingerprint-style template. Verification quality is
//! measured with log-disjoint cross-validation and the equal error rate.
//!
//! [`synthgen`] produces procedural log ends with ground truth so the whole
//! pipeline runs without external data.

pub mod error;
pub mod imaging;
pub mod mask;
pub mod sample;

pub mod baselines;
pub mod embedding;
pub mod evaluation;
pub mod segmentation;
pub mod synthgen;

pub mod commands;
pub mod config;
pub mod methods;
pub mod pipeline;

pub(crate) mod nn;

pub use error::{Error, Result};
pub use sample::{AcquisitionId, ClassLabel, End};
