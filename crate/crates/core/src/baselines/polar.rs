use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::segmentation::SquarePatch;

use super::{masked_gray, ray_extent, screen_direction, PithEstimate};

const RADIAL_SUBSAMPLES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGeometry {
    pub bands: usize,
    pub angular_positions: usize,
    /// Pre-alignment rotation; column 0 is the direction this rotation maps to "up".
    pub reference_deg: f64,
}

impl Default for PolarGeometry {
    fn default() -> Self {
        Self {
            bands: 8,
            angular_positions: 512,
            reference_deg: 0.0,
        }
    }
}

impl PolarGeometry {
    /// Screen angle of column `col`.
    pub fn column_angle(&self, col: f64) -> f64 {
        90.0 - self.reference_deg + 360.0 * col / self.angular_positions as f64
    }
}

/// Unwrapped CS texture: rows are bands (inner to outer), columns are angles
/// counterclockwise from the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarImage {
    pub bands: usize,
    pub angular_positions: usize,
    pub values: Vec<f32>,
    /// False where a sample fell outside the CS.
    pub valid: Vec<bool>,
}

impl PolarImage {
    pub fn get(&self, band: usize, col: usize) -> f32 {
        self.values[band * self.angular_positions + col]
    }

    pub fn is_valid(&self, band: usize, col: usize) -> bool {
        self.valid[band * self.angular_positions + col]
    }

    pub fn row(&self, band: usize) -> &[f32] {
        &self.values[band * self.angular_positions..(band + 1) * self.angular_positions]
    }

    /// Column `c` of the result is column `c - k` of `self` (circularly).
    pub fn shifted(&self, k: i64) -> Self {
        let n = self.angular_positions;
        let mut out = self.clone();
        for b in 0..self.bands {
            for c in 0..n {
                let src = (c as i64 - k).rem_euclid(n as i64) as usize;
                out.values[b * n + c] = self.values[b * n + src];
                out.valid[b * n + c] = self.valid[b * n + src];
            }
        }
        out
    }
}

/// Samples along rays from the pith with the radius normalized per ray to the
/// mask boundary. Each band averages a few radial samples.
pub fn polar_unwrap(
    patch: &SquarePatch,
    mask: &BinaryMask,
    pith: &PithEstimate,
    geometry: &PolarGeometry,
) -> Result<PolarImage> {
    if geometry.bands < 1 || geometry.angular_positions < 8 {
        return Err(Error::InvalidInput(format!(
            "polar geometry needs >= 1 band and >= 8 angles, got {}x{}",
            geometry.bands, geometry.angular_positions
        )));
    }
    let gray = masked_gray(patch, mask)?;
    let [px, py] = pith.position;
    if !mask.contains_point(px, py) {
        return Err(Error::InvalidInput(format!(
            "pith ({px:.1}, {py:.1}) lies outside the CS"
        )));
    }
    let (nb, na) = (geometry.bands, geometry.angular_positions);
    let mut values = vec![0f32; nb * na];
    let mut valid = vec![false; nb * na];
    for col in 0..na {
        let dir = screen_direction(geometry.column_angle(col as f64));
        let extent = ray_extent(mask, pith.position, dir);
        for band in 0..nb {
            let mut sum = 0.0f32;
            let mut inside = extent >= 1.0;
            for k in 0..RADIAL_SUBSAMPLES {
                let rho = (band as f64 + (k as f64 + 0.5) / RADIAL_SUBSAMPLES as f64) / nb as f64;
                let (x, y) = (px + rho * extent * dir[0], py + rho * extent * dir[1]);
                inside &= mask.contains_point(x, y);
                sum += gray.sample(x, y);
            }
            values[band * na + col] = sum / RADIAL_SUBSAMPLES as f32;
            valid[band * na + col] = inside;
        }
    }
    Ok(PolarImage {
        bands: nb,
        angular_positions: na,
        values,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{rotate_point, rotate_rgb};
    use image::{Rgb, RgbImage};

    const SIDE: u32 = 91;

    fn disc(center: [f64; 2], radius: f64) -> BinaryMask {
        BinaryMask::from_fn(SIDE, SIDE, |x, y| {
            (x as f64 + 0.5 - center[0]).hypot(y as f64 + 0.5 - center[1]) <= radius
        })
    }

    fn textured(mask: &BinaryMask, f: impl Fn(f64, f64) -> f64) -> SquarePatch {
        SquarePatch::from_image(RgbImage::from_fn(SIDE, SIDE, |x, y| {
            if mask.get(x, y) {
                let v = f(x as f64 + 0.5, y as f64 + 0.5).clamp(0.0, 255.0) as u8;
                Rgb([v, v, v])
            } else {
                Rgb([0, 0, 0])
            }
        }))
        .unwrap()
    }

    fn pith(p: [f64; 2]) -> PithEstimate {
        PithEstimate {
            position: p,
            confidence: 1.0,
        }
    }

    fn correlation(a: &[f32], b: &[f32]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().map(|&v| v as f64).sum::<f64>() / n;
        let mb = b.iter().map(|&v| v as f64).sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (&x, &y) in a.iter().zip(b) {
            let (dx, dy) = (x as f64 - ma, y as f64 - mb);
            sab += dx * dy;
            saa += dx * dx;
            sbb += dy * dy;
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn default_shape_is_eight_by_512() {
        let c = [45.5, 45.5];
        let mask = disc(c, 40.0);
        let patch = textured(&mask, |x, y| x + y);
        let p = polar_unwrap(&patch, &mask, &pith(c), &PolarGeometry::default()).unwrap();
        assert_eq!(
            (p.bands, p.angular_positions, p.values.len()),
            (8, 512, 8 * 512)
        );
    }

    #[test]
    fn radial_pattern_gives_constant_rows() {
        let c = [45.5, 45.5];
        let mask = disc(c, 40.0);
        let patch = textured(&mask, |x, y| {
            128.0 + 90.0 * ((x - c[0]).hypot(y - c[1]) / 10.0).sin()
        });
        let geo = PolarGeometry {
            bands: 6,
            angular_positions: 64,
            reference_deg: 0.0,
        };
        let p = polar_unwrap(&patch, &mask, &pith(c), &geo).unwrap();
        for b in 0..6 {
            let row = p.row(b);
            let mean = row.iter().sum::<f32>() / row.len() as f32;
            let spread = row.iter().map(|v| (v - mean).abs()).fold(0.0, f32::max);
            assert!(spread < 6.0, "band {b} spread {spread}");
        }
    }

    #[test]
    fn rotation_shifts_columns() {
        let c = [44.7, 46.2];
        let mask = disc([45.5, 45.5], 40.0);
        let pattern = |x: f64, y: f64| {
            let (dx, dy) = (x - c[0], y - c[1]);
            let r = dx.hypot(dy);
            let a = (-dy).atan2(dx);
            128.0 + 50.0 * (r / 4.0 + 0.8 * (3.0 * a).sin()).sin() + 30.0 * (2.0 * a).cos()
        };
        let patch = textured(&mask, pattern);
        let geo = PolarGeometry {
            bands: 4,
            angular_positions: 64,
            reference_deg: 0.0,
        };
        let base = polar_unwrap(&patch, &mask, &pith(c), &geo).unwrap();
        for k in [16i64, 8, 3] {
            let deg = 360.0 * k as f64 / 64.0;
            let rot = SquarePatch::from_image(rotate_rgb(&patch.pixels, deg)).unwrap();
            let rot_mask = BinaryMask::from_luma(&image::imageops::grayscale(&rotate_rgb(
                &image::DynamicImage::ImageLuma8(mask.to_luma()).to_rgb8(),
                deg,
            )));
            let rc = rotate_point(c, deg, SIDE, SIDE);
            let got = polar_unwrap(&rot, &rot_mask, &pith(rc), &geo).unwrap();
            let want = base.shifted(k);
            let corr = correlation(&got.values, &want.values);
            assert!(corr >= 0.99, "k={k}: correlation {corr}");
        }
    }

    #[test]
    fn pith_outside_mask_is_rejected() {
        let mask = disc([45.5, 45.5], 20.0);
        let patch = textured(&mask, |_, _| 100.0);
        let err = polar_unwrap(&patch, &mask, &pith([2.0, 2.0]), &PolarGeometry::default());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }
}
