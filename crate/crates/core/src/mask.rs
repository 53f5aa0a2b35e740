//! Per-pixel cross-section masks: the soft segmenter output and its binarized form.

use image::{GrayImage, Luma};
use imageproc::distance_transform::Norm;
use imageproc::region_labelling::{connected_components, Connectivity};

use crate::error::{Error, Result};

/// Segmenter output: one CS probability in `[0, 1]` per pixel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMask {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl ProbabilityMask {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self> {
        if values.len() != (width as usize) * (height as usize) {
            return Err(Error::InvalidInput(format!(
                "probability mask of {width}x{height} needs {} values, got {}",
                width as usize * height as usize,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "probability {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f32) -> Result<Self> {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[(y * self.width + x) as usize]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// CS (1) / background (0) decision per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    values: Vec<u8>,
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BoundingBox {
    pub fn width(&self) -> u32 {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min + 1
    }
}

impl BinaryMask {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            values: vec![0; width as usize * height as usize],
        }
    }

    pub fn new(width: u32, height: u32, values: Vec<u8>) -> Result<Self> {
        if values.len() != (width as usize) * (height as usize) {
            return Err(Error::InvalidInput(format!(
                "binary mask of {width}x{height} needs {} values, got {}",
                width as usize * height as usize,
                values.len()
            )));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::InvalidInput(
                "binary mask values must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y) as u8);
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    /// Reads an 8-bit mask; any value ≥ 128 is foreground.
    pub fn from_luma(img: &GrayImage) -> Self {
        Self::from_fn(img.width(), img.height(), |x, y| {
            img.get_pixel(x, y)[0] >= 128
        })
    }

    /// 8-bit rendering, 0 = background, 255 = CS.
    pub fn to_luma(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.values[(y * self.width + x) as usize] == 1
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        self.values[(y * self.width + x) as usize] = on as u8;
    }

    /// Foreground test at a continuous position (pixel `(i, j)` covers `[i, i+1) × [j, j+1)`).
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return false;
        }
        self.get(x as u32, y as u32)
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    pub fn bbox(&self) -> Option<BoundingBox> {
        let mut bbox: Option<BoundingBox> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                bbox = Some(match bbox {
                    None => BoundingBox {
                        x_min: x,
                        y_min: y,
                        x_max: x,
                        y_max: y,
                    },
                    Some(b) => BoundingBox {
                        x_min: b.x_min.min(x),
                        y_min: b.y_min.min(y),
                        x_max: b.x_max.max(x),
                        y_max: b.y_max.max(y),
                    },
                });
            }
        }
        bbox
    }

    /// Center of mass of the foreground in continuous coordinates (pixel centers at `i + 0.5`).
    pub fn centroid(&self) -> Option<[f64; 2]> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| [sx / n as f64, sy / n as f64])
    }

    pub fn component_count(&self) -> usize {
        let labels = connected_components(&self.to_luma(), Connectivity::Eight, Luma([0u8]));
        labels.pixels().map(|p| p[0]).max().unwrap_or(0) as usize
    }

    /// Keeps only the largest 8-connected foreground component.
    pub fn largest_component(&self) -> BinaryMask {
        let labels = connected_components(&self.to_luma(), Connectivity::Eight, Luma([0u8]));
        let n = labels.pixels().map(|p| p[0]).max().unwrap_or(0) as usize;
        if n <= 1 {
            return self.clone();
        }
        let mut sizes = vec![0usize; n + 1];
        for p in labels.pixels() {
            sizes[p[0] as usize] += 1;
        }
        let keep = (1..=n)
            .max_by_key(|&l| (sizes[l], std::cmp::Reverse(l)))
            .unwrap_or(1) as u32;
        Self::from_fn(self.width, self.height, |x, y| {
            labels.get_pixel(x, y)[0] == keep
        })
    }

    pub fn dilate(&self, radius: u8) -> BinaryMask {
        Self::from_luma(&imageproc::morphology::dilate(
            &self.to_luma(),
            Norm::L2,
            radius,
        ))
    }

    pub fn erode(&self, radius: u8) -> BinaryMask {
        Self::from_luma(&imageproc::morphology::erode(
            &self.to_luma(),
            Norm::L2,
            radius,
        ))
    }

    /// Pixelwise `self ⊇ other`.
    pub fn contains_mask(&self, other: &BinaryMask) -> bool {
        self.dimensions() == other.dimensions()
            && self.values.iter().zip(&other.values).all(|(&a, &b)| a >= b)
    }
}
