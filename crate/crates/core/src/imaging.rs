//! Small raster helpers. Coordinates are continuous with pixel `(i, j)`
//! covering `[i, i+1) × [j, j+1)`; rotations are counterclockwise-positive on
//! screen about the image center `(w/2, h/2)`.

use image::{Rgb, RgbImage};

use crate::synthgen::rotate_screen;

/// Rotates about the image center with bilinear interpolation and black fill.
pub fn rotate_rgb(img: &RgbImage, deg: f64) -> RgbImage {
    let (w, h) = img.dimensions();
    let c = [w as f64 / 2.0, h as f64 / 2.0];
    RgbImage::from_fn(w, h, |x, y| {
        let d = rotate_screen([x as f64 + 0.5 - c[0], y as f64 + 0.5 - c[1]], -deg);
        sample_rgb(img, c[0] + d[0], c[1] + d[1])
    })
}

/// Where a point lands when a `w × h` image is rotated by [`rotate_rgb`].
pub fn rotate_point(p: [f64; 2], deg: f64, w: u32, h: u32) -> [f64; 2] {
    let c = [w as f64 / 2.0, h as f64 / 2.0];
    let d = rotate_screen([p[0] - c[0], p[1] - c[1]], deg);
    [c[0] + d[0], c[1] + d[1]]
}

fn sample_rgb(img: &RgbImage, x: f64, y: f64) -> Rgb<u8> {
    let (w, h) = img.dimensions();
    let (u, v) = (x - 0.5, y - 0.5);
    let (x0, y0) = (u.floor(), v.floor());
    let (fx, fy) = (u - x0, v - y0);
    let mut acc = [0.0f64; 3];
    for (dx, dy, wt) in [
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ] {
        let (xi, yi) = (x0 as i64 + dx, y0 as i64 + dy);
        if wt == 0.0 || xi < 0 || yi < 0 || xi >= w as i64 || yi >= h as i64 {
            continue;
        }
        let p = img.get_pixel(xi as u32, yi as u32);
        for k in 0..3 {
            acc[k] += wt * p[k] as f64;
        }
    }
    Rgb(acc.map(|c| c.round().clamp(0.0, 255.0) as u8))
}

/// Single-channel `f32` raster.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayField {
    pub fn from_rgb(img: &RgbImage) -> Self {
        let data = img
            .pixels()
            .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
            .collect();
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample at a continuous position, clamped to the raster.
    pub fn sample(&self, x: f64, y: f64) -> f32 {
        let u = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let v = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (u.floor() as usize, v.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = ((u - x0 as f64) as f32, (v - y0 as f64) as f32);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Separable Gaussian blur with clamped borders.
    pub fn blur(&self, sigma: f64) -> Self {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as i64;
        let kernel: Vec<f32> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32)
            .collect();
        let norm: f32 = kernel.iter().sum();
        let (w, h) = (self.width as i64, self.height as i64);
        let pass = |src: &[f32], horizontal: bool| {
            let mut out = vec![0f32; src.len()];
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0f32;
                    for (k, kv) in kernel.iter().enumerate() {
                        let o = k as i64 - radius;
                        let (sx, sy) = if horizontal {
                            ((x + o).clamp(0, w - 1), y)
                        } else {
                            (x, (y + o).clamp(0, h - 1))
                        };
                        acc += kv * src[(sy * w + sx) as usize];
                    }
                    out[(y * w + x) as usize] = acc / norm;
                }
            }
            out
        };
        let tmp = pass(&self.data, true);
        Self {
            width: self.width,
            height: self.height,
            data: pass(&tmp, false),
        }
    }

    /// Central-difference gradients `(d/dx, d/dy)`.
    pub fn gradients(&self) -> (GrayField, GrayField) {
        let (w, h) = (self.width, self.height);
        let mut gx = vec![0f32; w * h];
        let mut gy = vec![0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
                gx[y * w + x] = (self.get(xr, y) - self.get(xl, y)) / (xr - xl).max(1) as f32;
                gy[y * w + x] = (self.get(x, yd) - self.get(x, yu)) / (yd - yu).max(1) as f32;
            }
        }
        let mk = |data| GrayField {
            width: w,
            height: h,
            data,
        };
        (mk(gx), mk(gy))
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GrayField, f: impl Fn(f32, f32) -> f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}
