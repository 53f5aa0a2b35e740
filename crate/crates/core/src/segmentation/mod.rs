//! Cross-section segmentation and square patch extraction.
//!
//! A per-pixel model produces a [`ProbabilityMask`]; [`binarize`] thresholds it,
//! the largest component is kept, and [`extract_patch`] blacks out the
//! background and cuts the smallest square holding the CS plus a black frame.

mod model;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

pub use crate::mask::{BinaryMask, BoundingBox, ProbabilityMask};
pub use model::{train_segmenter, SegmenterConfig, SegmenterModel, SEGMENTER_VERSION};

use crate::error::{Error, Result};
use crate::sample::AcquisitionId;

/// Frame width around the CS in every patch.
pub const DEFAULT_BORDER: u32 = 5;

/// Binarization threshold used when a dataset tag has no explicit entry.
pub const DEFAULT_THRESHOLD: f32 = 0.5;

/// Threshold per dataset: the forest sets use a lower value so that dim CS
/// regions are not lost to the background.
pub fn default_threshold(dataset_tag: &str) -> f32 {
    match dataset_tag {
        "FH" | "FL" => 0.25,
        _ => DEFAULT_THRESHOLD,
    }
}

/// Values below `t` become background; values equal to `t` count as CS.
pub fn binarize(mask: &ProbabilityMask, t: f32) -> Result<BinaryMask> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidInput(format!("threshold {t} outside (0, 1)")));
    }
    BinaryMask::new(
        mask.width(),
        mask.height(),
        mask.values().iter().map(|&v| (v >= t) as u8).collect(),
    )
}

/// Binarizes and keeps the largest connected CS component.
pub fn clean_mask(mask: &ProbabilityMask, t: f32) -> Result<BinaryMask> {
    let bin = binarize(mask, t)?;
    if bin.is_empty() {
        return Err(Error::SegmentationFailed(
            "no pixel reached the threshold".into(),
        ));
    }
    Ok(bin.largest_component())
}

/// Fraction of pixels on which two masks agree.
pub fn pixel_accuracy(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    if pred.dimensions() != truth.dimensions() {
        return Err(Error::InvalidInput(format!(
            "mask shapes differ: {:?} vs {:?}",
            pred.dimensions(),
            truth.dimensions()
        )));
    }
    let n = pred.values().len();
    if n == 0 {
        return Ok(1.0);
    }
    let agree = pred
        .values()
        .iter()
        .zip(truth.values())
        .filter(|(a, b)| a == b)
        .count();
    Ok(agree as f64 / n as f64)
}

/// Square, black-background CS crop fed to the recognizers.
#[derive(Debug, Clone, PartialEq)]
pub struct SquarePatch {
    pub pixels: RgbImage,
    /// Source-image coordinates of the patch's top-left pixel (may be negative).
    pub origin: [i64; 2],
    pub source: Option<AcquisitionId>,
}

impl SquarePatch {
    /// Wraps an already square image, e.g. one read back from disk.
    pub fn from_image(pixels: RgbImage) -> Result<Self> {
        if pixels.width() != pixels.height() || pixels.width() == 0 {
            return Err(Error::InvalidInput(format!(
                "patch must be square and nonempty, got {}x{}",
                pixels.width(),
                pixels.height()
            )));
        }
        Ok(Self {
            pixels,
            origin: [0, 0],
            source: None,
        })
    }

    pub fn side(&self) -> u32 {
        self.pixels.width()
    }

    pub fn with_source(mut self, id: AcquisitionId) -> Self {
        self.source = Some(id);
        self
    }

    /// Cuts the same square out of a source-frame mask; outside is background.
    pub fn crop_mask(&self, mask: &BinaryMask) -> BinaryMask {
        let (w, h) = mask.dimensions();
        let [ox, oy] = self.origin;
        BinaryMask::from_fn(self.side(), self.side(), |i, j| {
            let (x, y) = (ox + i as i64, oy + j as i64);
            x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && mask.get(x as u32, y as u32)
        })
    }

    /// Maps a source-frame point into patch coordinates.
    pub fn to_patch_frame(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] - self.origin[0] as f64, p[1] - self.origin[1] as f64]
    }
}

/// Smallest square holding every CS pixel plus `border` black pixels on each side.
///
/// The square is centered on the bounding box of the CS; parts falling outside
/// the source image are black.
pub fn extract_patch(image: &RgbImage, mask: &BinaryMask, border: u32) -> Result<SquarePatch> {
    if image.dimensions() != mask.dimensions() {
        return Err(Error::InvalidInput(format!(
            "image {:?} and mask {:?} differ in size",
            image.dimensions(),
            mask.dimensions()
        )));
    }
    let bbox = mask
        .bbox()
        .ok_or_else(|| Error::SegmentationFailed("empty mask, no CS to crop".into()))?;
    let s0 = bbox.width().max(bbox.height());
    let side = s0 + 2 * border;
    let x0 = bbox.x_min as i64 - border as i64 - ((s0 - bbox.width()) / 2) as i64;
    let y0 = bbox.y_min as i64 - border as i64 - ((s0 - bbox.height()) / 2) as i64;
    let (w, h) = image.dimensions();
    let pixels = RgbImage::from_fn(side, side, |i, j| {
        let (x, y) = (x0 + i as i64, y0 + j as i64);
        if x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && mask.get(x as u32, y as u32) {
            *image.get_pixel(x as u32, y as u32)
        } else {
            Rgb([0, 0, 0])
        }
    });
    Ok(SquarePatch {
        pixels,
        origin: [x0, y0],
        source: None,
    })
}

/// One segmented acquisition: the patch plus the CS mask in patch coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedSample {
    pub id: AcquisitionId,
    pub patch: SquarePatch,
    pub mask: BinaryMask,
}

impl SegmentedSample {
    /// Cuts the patch for `mask` (source frame) out of `image`.
    pub fn cut(
        id: AcquisitionId,
        image: &RgbImage,
        mask: &BinaryMask,
        border: u32,
    ) -> Result<Self> {
        let patch = extract_patch(image, mask, border)?.with_source(id.clone());
        let mask = patch.crop_mask(mask);
        Ok(Self { id, patch, mask })
    }
}

/// What happened to one acquisition during batch segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationOutcome {
    pub id: AcquisitionId,
    pub failure: Option<String>,
}
