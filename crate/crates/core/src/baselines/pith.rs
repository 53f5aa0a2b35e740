use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imaging::GrayField;
use crate::mask::BinaryMask;
use crate::segmentation::SquarePatch;

use super::masked_gray;

/// Estimated ring center in patch coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PithEstimate {
    pub position: [f64; 2],
    /// Normalized accumulator peak in `[0, 1]`; 0 means the centroid fallback was used.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PithConfig {
    /// Pre-smoothing before gradients.
    pub gradient_sigma: f64,
    /// Window of the structure tensor.
    pub tensor_sigma: f64,
    /// Smoothing of the vote accumulator.
    pub accumulator_sigma: f64,
    /// Only every `stride`-th pixel per axis votes.
    pub stride: usize,
    /// Voters keep this far from the mask outline.
    pub edge_margin: u8,
}

impl Default for PithConfig {
    fn default() -> Self {
        Self {
            gradient_sigma: 1.0,
            tensor_sigma: 2.5,
            accumulator_sigma: 1.5,
            stride: 2,
            edge_margin: 3,
        }
    }
}

pub fn estimate_pith(patch: &SquarePatch, mask: &BinaryMask) -> Result<PithEstimate> {
    estimate_pith_with(patch, mask, &PithConfig::default())
}

/// Rings are locally tangent to circles around the pith, so the dominant
/// gradient direction of each pixel points along a line through it. Every
/// voter draws that line into an accumulator weighted by its orientation
/// strength; the strongest foreground peak is the estimate.
pub fn estimate_pith_with(
    patch: &SquarePatch,
    mask: &BinaryMask,
    config: &PithConfig,
) -> Result<PithEstimate> {
    let gray = masked_gray(patch, mask)?.blur(config.gradient_sigma);
    let (gx, gy) = gray.gradients();
    let jxx = gx.zip_map(&gx, |a, b| a * b).blur(config.tensor_sigma);
    let jxy = gx.zip_map(&gy, |a, b| a * b).blur(config.tensor_sigma);
    let jyy = gy.zip_map(&gy, |a, b| a * b).blur(config.tensor_sigma);

    let mut voters = mask.erode(config.edge_margin);
    if voters.is_empty() {
        voters = mask.clone();
    }
    let (w, h) = (gray.width, gray.height);
    let mut acc = GrayField {
        width: w,
        height: h,
        data: vec![0.0; w * h],
    };
    let stride = config.stride.max(1);
    let reach = (w + h) as i64;
    let mut total = 0.0f64;
    for y in (0..h).step_by(stride) {
        for x in (0..w).step_by(stride) {
            if !voters.get(x as u32, y as u32) {
                continue;
            }
            let i = y * w + x;
            let (a, b, c) = (jxx.data[i] as f64, jxy.data[i] as f64, jyy.data[i] as f64);
            let spread = (((a - c) / 2.0).powi(2) + b * b).sqrt();
            // (λ1 - λ2) of the tensor: strong, single-orientation texture votes hardest.
            let weight = (2.0 * spread).sqrt();
            if !(weight > 1e-6) {
                continue;
            }
            let theta = 0.5 * (2.0 * b).atan2(a - c);
            let (ny, nx) = theta.sin_cos();
            let origin = [x as f64 + 0.5, y as f64 + 0.5];
            for sign in [1.0, -1.0] {
                for t in 0..reach {
                    let px = origin[0] + sign * t as f64 * nx;
                    let py = origin[1] + sign * t as f64 * ny;
                    if px < 0.0 || py < 0.0 || px >= w as f64 || py >= h as f64 {
                        break;
                    }
                    if sign < 0.0 && t == 0 {
                        continue;
                    }
                    acc.data[py as usize * w + px as usize] += weight as f32;
                }
            }
            total += weight;
        }
    }
    if total <= 1e-6 {
        return Ok(PithEstimate {
            position: fallback_center(mask),
            confidence: 0.0,
        });
    }

    let acc = acc.blur(config.accumulator_sigma);
    let mut best: Option<(usize, usize, f32)> = None;
    for y in 0..h {
        for x in 0..w {
            let v = acc.get(x, y);
            if mask.get(x as u32, y as u32) && best.is_none_or(|(_, _, b)| v > b) {
                best = Some((x, y, v));
            }
        }
    }
    let (bx, by, peak) = best.expect("mask is nonempty");

    // Subpixel refinement: accumulator-weighted mean of the 3x3 neighborhood.
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for y in by.saturating_sub(1)..(by + 2).min(h) {
        for x in bx.saturating_sub(1)..(bx + 2).min(w) {
            let v = acc.get(x, y) as f64;
            sx += v * (x as f64 + 0.5);
            sy += v * (y as f64 + 0.5);
            sw += v;
        }
    }
    let mut position = [bx as f64 + 0.5, by as f64 + 0.5];
    if sw > 0.0 && mask.contains_point(sx / sw, sy / sw) {
        position = [sx / sw, sy / sw];
    }
    // A single line through the peak leaves about weight / (sqrt(2π) σ) there after blurring.
    let line_peak = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * config.accumulator_sigma.max(0.5));
    let confidence = (peak as f64 / (total * line_peak)).clamp(0.0, 1.0);
    Ok(PithEstimate {
        position,
        confidence,
    })
}

/// Mask centroid, or the foreground pixel center nearest to it.
fn fallback_center(mask: &BinaryMask) -> [f64; 2] {
    let c = mask.centroid().unwrap_or([0.0, 0.0]);
    if mask.contains_point(c[0], c[1]) {
        return c;
    }
    let mut best = (f64::INFINITY, c);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let p = [x as f64 + 0.5, y as f64 + 0.5];
                let d = (p[0] - c[0]).hypot(p[1] - c[1]);
                if d < best.0 {
                    best = (d, p);
                }
            }
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    fn disc(side: u32, center: [f64; 2], radius: f64) -> BinaryMask {
        BinaryMask::from_fn(side, side, |x, y| {
            (x as f64 + 0.5 - center[0]).hypot(y as f64 + 0.5 - center[1]) <= radius
        })
    }

    fn rings(side: u32, mask: &BinaryMask, c: [f64; 2], period: f64) -> SquarePatch {
        SquarePatch::from_image(RgbImage::from_fn(side, side, |x, y| {
            if !mask.get(x, y) {
                return Rgb([0, 0, 0]);
            }
            let r = (x as f64 + 0.5 - c[0]).hypot(y as f64 + 0.5 - c[1]);
            let v = (128.0 + 80.0 * (std::f64::consts::TAU * r / period).sin()) as u8;
            Rgb([v, v, v])
        }))
        .unwrap()
    }

    #[test]
    fn concentric_rings_locate_their_center() {
        for c in [[50.5, 50.5], [43.2, 57.9], [60.7, 41.1]] {
            let mask = disc(101, [50.5, 50.5], 45.0);
            let est = estimate_pith(&rings(101, &mask, c, 7.0), &mask).unwrap();
            let err = (est.position[0] - c[0]).hypot(est.position[1] - c[1]);
            assert!(err <= 2.0, "center {c:?} estimate {:?}", est.position);
            assert!(est.confidence > 0.0 && est.confidence <= 1.0);
        }
    }

    #[test]
    fn uniform_patch_falls_back_to_centroid() {
        let mask = disc(60, [30.0, 30.0], 20.0);
        let patch = SquarePatch::from_image(RgbImage::from_fn(60, 60, |x, y| {
            if mask.get(x, y) {
                Rgb([120, 120, 120])
            } else {
                Rgb([0, 0, 0])
            }
        }))
        .unwrap();
        let est = estimate_pith(&patch, &mask).unwrap();
        assert_eq!(est.confidence, 0.0);
        assert_eq!(est.position, mask.centroid().unwrap());
    }

    #[test]
    fn fallback_stays_in_foreground() {
        // ring-shaped mask: centroid is in the hole
        let mask = BinaryMask::from_fn(40, 40, |x, y| {
            let r = (x as f64 + 0.5 - 20.0).hypot(y as f64 + 0.5 - 20.0);
            (10.0..18.0).contains(&r)
        });
        let p = fallback_center(&mask);
        assert!(mask.contains_point(p[0], p[1]));
    }

    #[test]
    fn mismatched_mask_is_rejected() {
        let patch = SquarePatch::from_image(RgbImage::new(10, 10)).unwrap();
        assert!(estimate_pith(&patch, &BinaryMask::zeros(12, 12)).is_err());
        assert!(estimate_pith(&patch, &BinaryMask::zeros(10, 10)).is_err());
    }
}
