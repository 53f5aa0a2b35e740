use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::segmentation::SquarePatch;

use super::{masked_gray, ray_extent, screen_direction, sha256_json, PithEstimate};

/// Boundary samples per full turn used to normalize radii.
const OUTLINE_SAMPLES: usize = 720;
const FREQUENCY_RAYS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub bands: usize,
    pub cells_per_band: usize,
    pub orientation_bins: usize,
    pub frequency_bins: usize,
    /// Ring frequency range covered by the frequency bins, cycles per pixel.
    pub min_frequency: f64,
    pub max_frequency: f64,
    pub gradient_sigma: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            bands: 4,
            cells_per_band: 16,
            orientation_bins: 8,
            frequency_bins: 4,
            min_frequency: 0.02,
            max_frequency: 0.3,
            gradient_sigma: 1.0,
        }
    }
}

impl GridConfig {
    pub fn descriptor_len(&self) -> usize {
        self.orientation_bins * self.frequency_bins
    }

    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct HashInput<'a> {
            kind: &'static str,
            config: &'a GridConfig,
        }
        sha256_json(&HashInput {
            kind: "circular-grid",
            config: self,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.bands == 0
            || self.cells_per_band < 2
            || self.orientation_bins == 0
            || self.frequency_bins == 0
        {
            return Err(Error::InvalidInput(
                "circular grid needs bands, >= 2 cells and nonzero bins".into(),
            ));
        }
        if !(self.min_frequency >= 0.0 && self.max_frequency > self.min_frequency) {
            return Err(Error::InvalidInput(
                "circular grid frequency range is empty".into(),
            ));
        }
        Ok(())
    }
}

/// Per band, a circular sequence of cell descriptors ordered counterclockwise
/// from the reference direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularGridTemplate {
    pub bands: usize,
    pub cells_per_band: usize,
    pub descriptor_len: usize,
    /// Outer radius of each band as a fraction of the CS radius along the ray.
    pub band_radii: Vec<f64>,
    pub features: Vec<f32>,
    pub valid: Vec<bool>,
    pub config_hash: String,
}

impl CircularGridTemplate {
    pub fn descriptor(&self, band: usize, cell: usize) -> &[f32] {
        let i = band * self.cells_per_band + cell;
        &self.features[i * self.descriptor_len..(i + 1) * self.descriptor_len]
    }

    pub fn is_valid(&self, band: usize, cell: usize) -> bool {
        self.valid[band * self.cells_per_band + cell]
    }

    /// Cell `c` of every band of the result is cell `c - k` of `self`.
    pub fn shifted(&self, k: i64) -> Self {
        let (n, d) = (self.cells_per_band, self.descriptor_len);
        let mut out = self.clone();
        for b in 0..self.bands {
            for c in 0..n {
                let src = b * n + (c as i64 - k).rem_euclid(n as i64) as usize;
                let dst = b * n + c;
                out.valid[dst] = self.valid[src];
                out.features[dst * d..(dst + 1) * d]
                    .copy_from_slice(&self.features[src * d..(src + 1) * d]);
            }
        }
        out
    }
}

/// Band/cell partition around the pith with radii normalized to the CS outline.
/// Each cell holds a histogram of gradient orientation relative to the radial
/// direction, spread over ring-frequency bins by the cell's radial ring count.
pub fn circular_grid_features(
    patch: &SquarePatch,
    mask: &BinaryMask,
    pith: &PithEstimate,
    config: &GridConfig,
    reference_deg: f64,
) -> Result<CircularGridTemplate> {
    config.validate()?;
    let gray = masked_gray(patch, mask)?.blur(config.gradient_sigma);
    let [px, py] = pith.position;
    if !mask.contains_point(px, py) {
        return Err(Error::InvalidInput(format!(
            "pith ({px:.1}, {py:.1}) lies outside the CS"
        )));
    }
    let start = 90.0 - reference_deg;
    let outline: Vec<f64> = (0..OUTLINE_SAMPLES)
        .map(|i| {
            ray_extent(
                mask,
                pith.position,
                screen_direction(start + 360.0 * i as f64 / OUTLINE_SAMPLES as f64),
            )
        })
        .collect();
    let extent_at = |rel_deg: f64| {
        let u = rel_deg.rem_euclid(360.0) / 360.0 * OUTLINE_SAMPLES as f64;
        let i = u.floor() as usize % OUTLINE_SAMPLES;
        let f = u - u.floor();
        outline[i] * (1.0 - f) + outline[(i + 1) % OUTLINE_SAMPLES] * f
    };

    let (nb, nc, no) = (config.bands, config.cells_per_band, config.orientation_bins);
    let cell_deg = 360.0 / nc as f64;
    let mut orient = vec![0f64; nb * nc * no];
    let mut pixels = vec![0usize; nb * nc];
    let (gx, gy) = gray.gradients();
    for y in 0..gray.height {
        for x in 0..gray.width {
            if !mask.get(x as u32, y as u32) {
                continue;
            }
            let (dx, dy) = (x as f64 + 0.5 - px, y as f64 + 0.5 - py);
            let r = dx.hypot(dy);
            let phi = (-dy).atan2(dx).to_degrees();
            let rel = (phi - start).rem_euclid(360.0);
            let extent = extent_at(rel);
            if extent <= 0.0 || r >= extent {
                continue;
            }
            let band = ((r / extent * nb as f64) as usize).min(nb - 1);
            let cell = ((rel / cell_deg) as usize).min(nc - 1);
            let i = band * nc + cell;
            pixels[i] += 1;
            let (ux, uy) = (gx.get(x, y) as f64, gy.get(x, y) as f64);
            let magnitude = ux.hypot(uy);
            if magnitude <= 1e-9 {
                continue;
            }
            let alpha = (-uy).atan2(ux).to_degrees();
            let delta = (alpha - phi).rem_euclid(180.0);
            let bin = ((delta / (180.0 / no as f64)) as usize).min(no - 1);
            orient[i * no + bin] += magnitude;
        }
    }

    let d = config.descriptor_len();
    let mut features = vec![0f32; nb * nc * d];
    let mut valid = vec![false; nb * nc];
    for band in 0..nb {
        for cell in 0..nc {
            let i = band * nc + cell;
            let Some(freq) = ring_frequency(
                &gray,
                mask,
                pith.position,
                start,
                cell_deg,
                cell,
                band,
                nb,
                &extent_at,
            ) else {
                continue;
            };
            if pixels[i] < 3 {
                continue;
            }
            valid[i] = true;
            let hist = &orient[i * no..(i + 1) * no];
            let total: f64 = hist.iter().sum();
            let weights = frequency_weights(freq, config);
            for o in 0..no {
                let h = if total > 0.0 {
                    hist[o] / total
                } else {
                    1.0 / no as f64
                };
                for (k, w) in weights.iter().enumerate() {
                    features[i * d + o * config.frequency_bins + k] = (h * w) as f32;
                }
            }
        }
    }
    Ok(CircularGridTemplate {
        bands: nb,
        cells_per_band: nc,
        descriptor_len: d,
        band_radii: (1..=nb).map(|b| b as f64 / nb as f64).collect(),
        features,
        valid,
        config_hash: config.hash(),
    })
}

/// Mean ring crossings per pixel along a few radial rays through the cell.
#[allow(clippy::too_many_arguments)]
fn ring_frequency(
    gray: &crate::imaging::GrayField,
    mask: &BinaryMask,
    pith: [f64; 2],
    start: f64,
    cell_deg: f64,
    cell: usize,
    band: usize,
    bands: usize,
    extent_at: &impl Fn(f64) -> f64,
) -> Option<f64> {
    let (mut cycles, mut length) = (0.0, 0.0);
    for k in 0..FREQUENCY_RAYS {
        let rel = (cell as f64 + (k as f64 + 0.5) / FREQUENCY_RAYS as f64) * cell_deg;
        let dir = screen_direction(start + rel);
        let extent = extent_at(rel);
        let (r0, r1) = (
            extent * band as f64 / bands as f64,
            extent * (band + 1) as f64 / bands as f64,
        );
        let profile: Vec<f64> = (0..)
            .map(|s| r0 + 0.5 * s as f64)
            .take_while(|r| *r <= r1)
            .map(|r| [pith[0] + r * dir[0], pith[1] + r * dir[1]])
            .filter(|p| mask.contains_point(p[0], p[1]))
            .map(|p| gray.sample(p[0], p[1]) as f64)
            .collect();
        if profile.len() < 3 {
            continue;
        }
        let mean = profile.iter().sum::<f64>() / profile.len() as f64;
        let crossings = profile
            .windows(2)
            .filter(|w| (w[0] - mean) * (w[1] - mean) < 0.0)
            .count();
        cycles += crossings as f64 / 2.0;
        length += 0.5 * (profile.len() - 1) as f64;
    }
    (length >= 2.0).then(|| cycles / length)
}

/// Linear soft assignment to evenly spaced frequency bin centers.
fn frequency_weights(freq: f64, config: &GridConfig) -> Vec<f64> {
    let nf = config.frequency_bins;
    let mut w = vec![0.0; nf];
    if nf == 1 {
        w[0] = 1.0;
        return w;
    }
    let u = ((freq - config.min_frequency) / (config.max_frequency - config.min_frequency)
        * (nf - 1) as f64)
        .clamp(0.0, (nf - 1) as f64);
    let lo = (u.floor() as usize).min(nf - 2);
    let f = u - lo as f64;
    w[lo] = 1.0 - f;
    w[lo + 1] = f;
    w
}

/// Minimum over global circular cell shifts of the mean L1 distance between
/// mutually valid cells.
pub fn circular_grid_compare(t1: &CircularGridTemplate, t2: &CircularGridTemplate) -> Result<f64> {
    if (t1.bands, t1.cells_per_band, t1.descriptor_len)
        != (t2.bands, t2.cells_per_band, t2.descriptor_len)
    {
        return Err(Error::InvalidInput(
            "circular grid geometries differ".into(),
        ));
    }
    if t1.config_hash != t2.config_hash {
        return Err(Error::Incomparable(
            "circular grid templates come from different configurations".into(),
        ));
    }
    let n = t1.cells_per_band;
    let mut best: Option<f64> = None;
    for s in 0..n {
        let (mut sum, mut count) = (0.0f64, 0usize);
        for b in 0..t1.bands {
            for c in 0..n {
                let c2 = (c + s) % n;
                if !(t1.is_valid(b, c) && t2.is_valid(b, c2)) {
                    continue;
                }
                sum += t1
                    .descriptor(b, c)
                    .iter()
                    .zip(t2.descriptor(b, c2))
                    .map(|(x, y)| (*x as f64 - *y as f64).abs())
                    .sum::<f64>();
                count += 1;
            }
        }
        if count > 0 {
            let d = sum / count as f64;
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best.ok_or_else(|| Error::Incomparable("no mutually valid grid cells".into()))
}
