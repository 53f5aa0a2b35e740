use image::imageops::{self, FilterType};
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::rotate_rgb;
use crate::segmentation::SquarePatch;

/// Resize-then-crop sizes. The default resizes to 234 and crops 224.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentGeometry {
    pub resize_side: u32,
    pub crop_side: u32,
}

impl Default for AugmentGeometry {
    fn default() -> Self {
        Self {
            resize_side: 234,
            crop_side: 224,
        }
    }
}

impl AugmentGeometry {
    /// Keeps the 234:224 ratio for other network input sizes.
    pub fn for_input(crop_side: u32) -> Self {
        let slack = ((crop_side as f64) * 10.0 / 224.0).round().max(1.0) as u32;
        Self {
            resize_side: crop_side + slack,
            crop_side,
        }
    }

    pub fn max_offset(&self) -> u32 {
        self.resize_side - self.crop_side
    }
}

/// One draw of the augmentation nuisances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub angle_deg: f64,
    /// Top-left corner of the crop inside the resized image.
    pub offset: [u32; 2],
    /// Brightness multiplier.
    pub gain: f64,
}

impl AugmentParams {
    pub fn sample(geometry: AugmentGeometry, rng: &mut impl Rng) -> Self {
        let m = geometry.max_offset();
        Self {
            angle_deg: rng.random_range(0.0..360.0),
            offset: [rng.random_range(0..=m), rng.random_range(0..=m)],
            gain: rng.random_range(0.8..1.25),
        }
    }

    /// No rotation, centered crop.
    pub fn identity(geometry: AugmentGeometry) -> Self {
        let c = geometry.max_offset() / 2;
        Self {
            angle_deg: 0.0,
            offset: [c, c],
            gain: 1.0,
        }
    }
}

/// Rotate about the patch center (black fill), resize, crop, then scale brightness.
pub fn augment_with(
    patch: &SquarePatch,
    geometry: AugmentGeometry,
    params: AugmentParams,
) -> RgbImage {
    let rotated;
    let src = if params.angle_deg == 0.0 {
        &patch.pixels
    } else {
        rotated = rotate_rgb(&patch.pixels, params.angle_deg);
        &rotated
    };
    let side = geometry.resize_side;
    let resized = imageops::resize(src, side, side, FilterType::Triangle);
    let m = geometry.max_offset();
    let [ox, oy] = params.offset.map(|o| o.min(m));
    let mut out =
        imageops::crop_imm(&resized, ox, oy, geometry.crop_side, geometry.crop_side).to_image();
    if params.gain != 1.0 {
        for p in out.pixels_mut() {
            p.0 =
                p.0.map(|c| (c as f64 * params.gain).round().min(255.0) as u8);
        }
    }
    out
}

/// Random rotation in `[0, 360)` and a uniformly random valid crop, fixed by `seed`.
pub fn augment(patch: &SquarePatch, geometry: AugmentGeometry, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    augment_with(patch, geometry, AugmentParams::sample(geometry, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn patch(side: u32) -> SquarePatch {
        let c = side as f64 / 2.0;
        let img = RgbImage::from_fn(side, side, |x, y| {
            let r = (x as f64 + 0.5 - c).hypot(y as f64 + 0.5 - c);
            if r < c - 5.0 {
                Rgb([(x * 3 % 256) as u8, (y * 5 % 256) as u8, 128])
            } else {
                Rgb([0, 0, 0])
            }
        });
        SquarePatch::from_image(img).unwrap()
    }

    #[test]
    fn output_has_crop_size() {
        let g = AugmentGeometry::default();
        for seed in 0..3 {
            let out = augment(&patch(90), g, seed);
            assert_eq!(out.dimensions(), (224, 224));
        }
        let small = AugmentGeometry::for_input(64);
        assert_eq!(small.resize_side, 67);
        assert_eq!(augment(&patch(30), small, 1).dimensions(), (64, 64));
    }

    #[test]
    fn identity_nuisance_is_resize_then_center_crop() {
        let g = AugmentGeometry::default();
        let p = patch(100);
        let out = augment_with(&p, g, AugmentParams::identity(g));
        let resized = imageops::resize(&p.pixels, 234, 234, FilterType::Triangle);
        let expected = imageops::crop_imm(&resized, 5, 5, 224, 224).to_image();
        assert_eq!(out, expected);
    }

    #[test]
    fn rotated_corners_stay_black() {
        let g = AugmentGeometry::default();
        let out = augment_with(
            &patch(120),
            g,
            AugmentParams {
                angle_deg: 37.0,
                offset: [0, 0],
                gain: 1.3,
            },
        );
        for (x, y) in [(0, 0), (223, 0), (0, 223), (223, 223)] {
            assert_eq!(out.get_pixel(x, y).0, [0, 0, 0]);
        }
    }

    #[test]
    fn same_seed_same_output() {
        let g = AugmentGeometry::for_input(64);
        let p = patch(80);
        assert_eq!(augment(&p, g, 77), augment(&p, g, 77));
    }

    #[test]
    fn crops_agree_on_their_overlap() {
        let g = AugmentGeometry::default();
        let p = patch(100);
        let a = augment_with(
            &p,
            g,
            AugmentParams {
                angle_deg: 12.5,
                offset: [0, 3],
                gain: 0.9,
            },
        );
        let b = augment_with(
            &p,
            g,
            AugmentParams {
                angle_deg: 12.5,
                offset: [7, 10],
                gain: 0.9,
            },
        );
        // b's pixel (x, y) is a's (x + 7, y + 7).
        for y in 0..217 {
            for x in 0..217 {
                assert_eq!(b.get_pixel(x, y), a.get_pixel(x + 7, y + 7));
            }
        }
    }

    #[test]
    fn gain_scales_and_saturates() {
        let g = AugmentGeometry::for_input(64);
        let p = patch(64);
        let base = augment_with(&p, g, AugmentParams::identity(g));
        let bright = augment_with(
            &p,
            g,
            AugmentParams {
                gain: 2.0,
                ..AugmentParams::identity(g)
            },
        );
        for (a, b) in base.pixels().zip(bright.pixels()) {
            for k in 0..3 {
                assert_eq!(b[k], (a[k] as u16 * 2).min(255) as u8);
            }
        }
    }
}
