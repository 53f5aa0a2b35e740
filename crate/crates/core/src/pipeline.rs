//! In-memory batch steps shared by the CLI, the examples and the tests.

use log::warn;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::segmentation::{
    clean_mask, pixel_accuracy, SegmentationOutcome, SegmentedSample, SegmenterModel,
};
use crate::synthgen::SynthSample;

/// Result of segmenting a batch of acquisitions.
#[derive(Debug, Clone)]
pub struct SegmentationRun {
    pub segmented: Vec<SegmentedSample>,
    pub outcomes: Vec<SegmentationOutcome>,
    /// Source-frame masks, `None` where segmentation failed.
    pub masks: Vec<Option<BinaryMask>>,
    /// Pixel accuracy against ground truth, per acquisition; empty for ground-truth masks.
    pub accuracies: Vec<f64>,
}

impl SegmentationRun {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.failure.is_some()).count()
    }

    pub fn failure_rate(&self) -> f64 {
        self.failures() as f64 / self.outcomes.len().max(1) as f64
    }

    pub fn mean_accuracy(&self) -> Option<f64> {
        (!self.accuracies.is_empty())
            .then(|| self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64)
    }
}

/// Segments every sample with `model` (ground-truth masks when `None`) and cuts patches.
/// Per-acquisition failures are recorded, not returned.
pub fn segment_samples(
    samples: &[SynthSample],
    model: Option<&SegmenterModel>,
    threshold: f32,
    border: u32,
) -> Result<SegmentationRun> {
    let mut run = SegmentationRun {
        segmented: Vec::new(),
        outcomes: Vec::new(),
        masks: Vec::new(),
        accuracies: Vec::new(),
    };
    for s in samples {
        let mask = match model {
            None => Ok(s.truth.mask.clone()),
            Some(m) => {
                let mask = clean_mask(&m.predict(&s.image)?, threshold);
                let empty = BinaryMask::zeros(s.image.width(), s.image.height());
                run.accuracies.push(pixel_accuracy(
                    mask.as_ref().unwrap_or(&empty),
                    &s.truth.mask,
                )?);
                mask
            }
        };
        let cut = mask.and_then(|m| {
            let seg = SegmentedSample::cut(s.id.clone(), &s.image, &m, border)?;
            Ok((seg, m))
        });
        match cut {
            Ok((seg, m)) => {
                run.segmented.push(seg);
                run.masks.push(Some(m));
                run.outcomes.push(SegmentationOutcome {
                    id: s.id.clone(),
                    failure: None,
                });
            }
            Err(e @ Error::SegmentationFailed(_)) => {
                warn!("{}: {e}", s.id);
                run.masks.push(None);
                run.outcomes.push(SegmentationOutcome {
                    id: s.id.clone(),
                    failure: Some(e.to_string()),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(run)
}
