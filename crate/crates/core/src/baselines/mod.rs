//! Traditional comparison methods: pith estimation, center-of-mass
//! pre-alignment, an iris-style Log-Gabor matcher and a circular-grid
//! fingerprint matcher.
//!
//! Angles are counterclockwise-positive on screen with the y axis pointing
//! down. Every comparison returns a distance: smaller means more similar.

mod grid;
mod iris;
mod pith;
mod polar;
mod template;

pub use grid::{circular_grid_compare, circular_grid_features, CircularGridTemplate, GridConfig};
pub use iris::{iris_compare, log_gabor_encode, IrisTemplate, LogGaborConfig, DEFAULT_MAX_SHIFT};
pub use pith::{estimate_pith, estimate_pith_with, PithConfig, PithEstimate};
pub use polar::{polar_unwrap, PolarGeometry, PolarImage};
pub use template::Template;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imaging::GrayField;
use crate::mask::BinaryMask;
use crate::segmentation::SquarePatch;

/// Rotation (degrees) that turns the mask's center-of-mass → pith vector to
/// point straight up. Vectors shorter than one pixel give 0.
pub fn prealign_cm(mask: &BinaryMask, pith: &PithEstimate) -> Result<f64> {
    let cm = mask
        .centroid()
        .ok_or_else(|| Error::InvalidInput("pre-alignment needs a nonempty mask".into()))?;
    let v = [pith.position[0] - cm[0], pith.position[1] - cm[1]];
    if v[0].hypot(v[1]) < 1.0 {
        return Ok(0.0);
    }
    let screen_angle = (-v[1]).atan2(v[0]).to_degrees();
    Ok(normalize_deg(90.0 - screen_angle))
}

/// Maps an angle to `(-180, 180]`.
pub(crate) fn normalize_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Unit vector at a counterclockwise screen angle measured from +x.
pub(crate) fn screen_direction(deg: f64) -> [f64; 2] {
    let (s, c) = deg.to_radians().sin_cos();
    [c, -s]
}

/// Luma of the patch with everything outside the mask set to the foreground
/// mean, so the CS outline does not produce gradients.
pub(crate) fn masked_gray(patch: &SquarePatch, mask: &BinaryMask) -> Result<GrayField> {
    check_patch_mask(patch, mask)?;
    let mut gray = GrayField::from_rgb(&patch.pixels);
    let (mut sum, mut n) = (0.0f64, 0usize);
    for (v, m) in gray.data.iter().zip(mask.values()) {
        if *m != 0 {
            sum += *v as f64;
            n += 1;
        }
    }
    let mean = if n > 0 { (sum / n as f64) as f32 } else { 0.0 };
    for (v, m) in gray.data.iter_mut().zip(mask.values()) {
        if *m == 0 {
            *v = mean;
        }
    }
    Ok(gray)
}

pub(crate) fn check_patch_mask(patch: &SquarePatch, mask: &BinaryMask) -> Result<()> {
    if mask.dimensions() != patch.pixels.dimensions() {
        return Err(Error::InvalidInput(format!(
            "mask {:?} does not match patch {:?}",
            mask.dimensions(),
            patch.pixels.dimensions()
        )));
    }
    if mask.is_empty() {
        return Err(Error::InvalidInput("mask has no foreground".into()));
    }
    Ok(())
}

/// Distance from `origin` along `dir` to the last point still inside the mask.
pub(crate) fn ray_extent(mask: &BinaryMask, origin: [f64; 2], dir: [f64; 2]) -> f64 {
    const STEP: f64 = 0.25;
    let limit = (mask.width() + mask.height()) as f64;
    let mut r = 0.0;
    while r < limit {
        let next = r + STEP;
        if !mask.contains_point(origin[0] + next * dir[0], origin[1] + next * dir[1]) {
            break;
        }
        r = next;
    }
    r
}

pub(crate) fn sha256_json<T: serde::Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}
