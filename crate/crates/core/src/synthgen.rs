//! Procedural log-end images with ground-truth masks and pith positions.
//!
//! Each log end is described by a [`LogSpec`] (ring widths, pith offset, outline
//! irregularity, texture seed) and rendered under an [`AcquisitionSpec`]
//! (rotation, translation, background, illumination, saw-cut noise). Rendering
//! is an analytic inverse mapping from image pixels into the canonical log
//! frame, so repeated acquisitions differ only by the modeled nuisances.
//!
//! Angles are counterclockwise-positive as seen on screen, with the image
//! y axis pointing down.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{io_at, Error, Result};
use crate::mask::BinaryMask;
use crate::sample::{AcquisitionId, ClassLabel, End};

/// Outline deviation at full irregularity, as a fraction of the CS radius.
const OUTLINE_DEPTH: f64 = 0.18;
/// Extra ring wobble at full irregularity.
const RING_WOBBLE: f64 = 0.06;

/// Geometry and texture identity of one log end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSpec {
    pub log_id: String,
    pub end: End,
    pub ring_count: usize,
    /// Ring widths in pixels, pith outwards.
    pub ring_widths: Vec<f64>,
    /// Pith position relative to the CS center, pixels.
    pub pith_offset: [f64; 2],
    pub cs_radius: f64,
    pub shape_irregularity: f64,
    pub texture_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundStyle {
    Forest,
    Sawmill,
    Studio,
}

/// Nuisance parameters of one acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub rotation_deg: f64,
    pub translation: [f64; 2],
    pub background_style: BackgroundStyle,
    pub illumination_gain: f64,
    pub sawcut_noise: f64,
    /// Seeds sensor noise and background texture.
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mask: BinaryMask,
    pub pith: [f64; 2],
    pub class_label: ClassLabel,
}

/// An acquisition together with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub id: AcquisitionId,
    pub image: RgbImage,
    pub truth: GroundTruth,
}

impl LogSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(format!("log {}: {msg}", self.log_id)));
        if self.ring_count < 3 {
            return bad(format!("ring_count {} < 3", self.ring_count));
        }
        if self.ring_widths.len() != self.ring_count {
            return bad(format!(
                "ring_count {} but {} ring widths",
                self.ring_count,
                self.ring_widths.len()
            ));
        }
        if self
            .ring_widths
            .iter()
            .any(|w| !(w.is_finite() && *w > 0.0))
        {
            return bad("ring widths must be positive".into());
        }
        if !(self.cs_radius.is_finite() && self.cs_radius > 0.0) {
            return bad(format!("cs_radius {} must be positive", self.cs_radius));
        }
        let total: f64 = self.ring_widths.iter().sum();
        if total > self.cs_radius + 1e-9 {
            return bad(format!(
                "ring widths sum to {total} > cs_radius {}",
                self.cs_radius
            ));
        }
        if !(0.0..=1.0).contains(&self.shape_irregularity) {
            return bad(format!(
                "shape_irregularity {} outside [0, 1]",
                self.shape_irregularity
            ));
        }
        let [px, py] = self.pith_offset;
        if !(px.is_finite() && py.is_finite()) || px.hypot(py) > 0.5 * self.cs_radius {
            return bad("pith offset must lie within half the CS radius".into());
        }
        Ok(())
    }

    /// Draws a random end: `ring_count` in `rings`, radius in `radius`.
    pub fn random(
        log_id: impl Into<String>,
        end: End,
        rings: (usize, usize),
        radius: (f64, f64),
        rng: &mut impl Rng,
    ) -> Self {
        let cs_radius = rng.random_range(radius.0..=radius.1);
        let ring_count = rng.random_range(rings.0.max(3)..=rings.1.max(3));
        let raw: Vec<f64> = (0..ring_count)
            .map(|_| rng.random_range(0.45..1.55))
            .collect();
        // Rings cover 85-95% of the radius; the outermost band is sapwood.
        let coverage = rng.random_range(0.85..0.95) * cs_radius;
        let scale = coverage / raw.iter().sum::<f64>();
        let ring_widths = raw.iter().map(|w| w * scale).collect();
        let offset_r = rng.random_range(0.05..0.25) * cs_radius;
        let offset_a = rng.random_range(0.0..TAU);
        Self {
            log_id: log_id.into(),
            end,
            ring_count,
            ring_widths,
            pith_offset: [offset_r * offset_a.cos(), offset_r * offset_a.sin()],
            cs_radius,
            shape_irregularity: rng.random_range(0.25..0.9),
            texture_seed: rng.next_u64(),
        }
    }
}

impl AcquisitionSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = self.rotation_deg.is_finite()
            && self.translation.iter().all(|t| t.is_finite())
            && self.illumination_gain.is_finite()
            && self.sawcut_noise.is_finite();
        if !finite {
            return Err(Error::InvalidSpec(
                "acquisition fields must be finite".into(),
            ));
        }
        if !(0.0..360.0).contains(&self.rotation_deg) {
            return Err(Error::InvalidSpec(format!(
                "rotation {} outside [0, 360)",
                self.rotation_deg
            )));
        }
        if !(0.5..=2.0).contains(&self.illumination_gain) {
            return Err(Error::InvalidSpec(format!(
                "illumination gain {} outside [0.5, 2]",
                self.illumination_gain
            )));
        }
        if !(0.0..=1.0).contains(&self.sawcut_noise) {
            return Err(Error::InvalidSpec(format!(
                "sawcut noise {} outside [0, 1]",
                self.sawcut_noise
            )));
        }
        Ok(())
    }

    /// Neutral acquisition: no rotation, no shift, studio background.
    pub fn neutral(noise_seed: u64) -> Self {
        Self {
            rotation_deg: 0.0,
            translation: [0.0, 0.0],
            background_style: BackgroundStyle::Studio,
            illumination_gain: 1.0,
            sawcut_noise: 0.0,
            noise_seed,
        }
    }
}

/// Rotates a screen-space vector counterclockwise by `deg` (y axis down).
pub fn rotate_screen(v: [f64; 2], deg: f64) -> [f64; 2] {
    let quarter = deg / 90.0;
    let (s, c) = if quarter.fract() == 0.0 {
        [(0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)][quarter.rem_euclid(4.0) as usize]
    } else {
        deg.to_radians().sin_cos()
    };
    [v[0] * c + v[1] * s, -v[0] * s + v[1] * c]
}

/// Everything about an end's appearance that follows from its texture seed.
struct EndTexture {
    outline_phase: [f64; 3],
    wobble_phase: [f64; 3],
    wobble_amp: [f64; 3],
    latewood: Vec<f64>,
    base: [f64; 3],
    saw_dir: [f64; 2],
    saw_period: f64,
    saw_phase: f64,
}

impl EndTexture {
    fn new(spec: &LogSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.texture_seed);
        let mut phase = || rng.random_range(0.0..TAU);
        let outline_phase = [phase(), phase(), phase()];
        let wobble_phase = [phase(), phase(), phase()];
        let saw_angle = phase();
        let saw_phase = phase();
        let wobble_amp = [
            rng.random_range(0.3..1.0),
            rng.random_range(0.2..0.7),
            rng.random_range(0.1..0.4),
        ];
        let latewood = (0..spec.ring_count)
            .map(|_| rng.random_range(0.3..0.7))
            .collect();
        let red = rng.random_range(180.0..230.0);
        let base = [
            red,
            red * rng.random_range(0.70..0.82),
            red * rng.random_range(0.42..0.58),
        ];
        Self {
            outline_phase,
            wobble_phase,
            wobble_amp,
            latewood,
            base,
            saw_dir: [saw_angle.cos(), saw_angle.sin()],
            saw_period: rng.random_range(3.0..7.0),
            saw_phase,
        }
    }

    /// Outline indentation profile in `[0, 1]`.
    fn outline(&self, theta: f64) -> f64 {
        let p = &self.outline_phase;
        let b = (2.0 * theta + p[0]).cos()
            + 0.5 * (3.0 * theta + p[1]).cos()
            + 0.25 * (5.0 * theta + p[2]).cos();
        0.5 + 0.5 * b / 1.75
    }

    fn wobble(&self, theta: f64) -> f64 {
        let (a, p) = (&self.wobble_amp, &self.wobble_phase);
        (a[0] * (theta + p[0]).cos()
            + a[1] * (2.0 * theta + p[1]).cos()
            + a[2] * (4.0 * theta + p[2]).cos())
            / (a[0] + a[1] + a[2])
    }
}

struct Renderer<'a> {
    spec: &'a LogSpec,
    tex: EndTexture,
    ring_starts: Vec<f64>,
}

impl<'a> Renderer<'a> {
    fn new(spec: &'a LogSpec) -> Self {
        let mut ring_starts = Vec::with_capacity(spec.ring_count + 1);
        let mut acc = 0.0;
        ring_starts.push(acc);
        for w in &spec.ring_widths {
            acc += w;
            ring_starts.push(acc);
        }
        Self {
            spec,
            tex: EndTexture::new(spec),
            ring_starts,
        }
    }

    fn boundary_radius(&self, theta: f64) -> f64 {
        self.spec.cs_radius
            * (1.0 - self.spec.shape_irregularity * OUTLINE_DEPTH * self.tex.outline(theta))
    }

    /// `q` is in the canonical frame, relative to the CS center.
    fn inside(&self, q: [f64; 2]) -> bool {
        let r = q[0].hypot(q[1]);
        r <= self.boundary_radius(q[1].atan2(q[0]))
    }

    /// Wood color at canonical position `q` (unit gain, before sensor noise).
    fn wood(&self, q: [f64; 2], sawcut: f64) -> [f64; 3] {
        let spec = self.spec;
        let irr = spec.shape_irregularity;
        let d = [q[0] - spec.pith_offset[0], q[1] - spec.pith_offset[1]];
        let beta = d[1].atan2(d[0]);
        let stretch = (1.0 - irr * OUTLINE_DEPTH * self.tex.outline(beta))
            * (1.0 + irr * RING_WOBBLE * self.tex.wobble(beta));
        let rho = d[0].hypot(d[1]) / stretch;

        let n = spec.ring_count;
        let mut shade = if rho >= self.ring_starts[n] {
            1.0
        } else {
            let i = self
                .ring_starts
                .partition_point(|&s| s <= rho)
                .saturating_sub(1)
                .min(n - 1);
            let t = (rho - self.ring_starts[i]) / spec.ring_widths[i];
            1.0 - self.tex.latewood[i] * smoothstep(0.55, 0.9, t)
        };
        if rho < 0.35 * spec.ring_widths[0] {
            shade *= 0.7;
        }
        let along = q[0] * self.tex.saw_dir[0] + q[1] * self.tex.saw_dir[1];
        let saw =
            1.0 + 0.10 * sawcut * (TAU * along / self.tex.saw_period + self.tex.saw_phase).sin();
        self.tex.base.map(|c| c * shade * saw)
    }
}

fn smoothstep(lo: f64, hi: f64, t: f64) -> f64 {
    let x = ((t - lo) / (hi - lo)).clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Low-frequency scene texture behind the log, fixed in image coordinates.
struct Background {
    style: BackgroundStyle,
    waves: [(f64, f64, f64); 3],
}

impl Background {
    fn new(style: BackgroundStyle, rng: &mut impl Rng, size: f64) -> Self {
        let mut wave = || {
            let a = rng.random_range(0.0..TAU);
            let k = rng.random_range(1.5..4.0) * TAU / size;
            (k * a.cos(), k * a.sin(), rng.random_range(0.0..TAU))
        };
        Self {
            style,
            waves: [wave(), wave(), wave()],
        }
    }

    fn color(&self, x: f64, y: f64) -> [f64; 3] {
        let blot: f64 = self
            .waves
            .iter()
            .map(|&(kx, ky, p)| (kx * x + ky * y + p).sin())
            .sum::<f64>()
            / 3.0;
        match self.style {
            BackgroundStyle::Forest => [75.0 + 30.0 * blot, 85.0 + 25.0 * blot, 50.0 + 15.0 * blot],
            BackgroundStyle::Sawmill => {
                let g = 115.0 + 20.0 * blot;
                [g, g * 0.97, g * 0.9]
            }
            BackgroundStyle::Studio => [18.0 + 4.0 * blot, 18.0 + 4.0 * blot, 20.0 + 4.0 * blot],
        }
    }

    fn noise_sigma(&self) -> f64 {
        match self.style {
            BackgroundStyle::Forest => 10.0,
            BackgroundStyle::Sawmill => 12.0,
            BackgroundStyle::Studio => 2.0,
        }
    }
}

/// Renders one acquisition of one log end.
///
/// The CS center sits at the image center plus `acq.translation`; the log is
/// rotated counterclockwise by `acq.rotation_deg` about it.
pub fn generate_end(
    spec: &LogSpec,
    acq: &AcquisitionSpec,
    image_size: u32,
) -> Result<(RgbImage, GroundTruth)> {
    spec.validate()?;
    acq.validate()?;
    let size = image_size as f64;
    if size < 2.0 * spec.cs_radius + 20.0 {
        return Err(Error::InvalidSpec(format!(
            "image size {image_size} < 2 * cs_radius + 20 = {}",
            2.0 * spec.cs_radius + 20.0
        )));
    }
    if spec.cs_radius + acq.translation[0].hypot(acq.translation[1]) > size / 2.0 - 1.0 {
        return Err(Error::InvalidSpec(
            "translation pushes the CS out of the image".into(),
        ));
    }

    let renderer = Renderer::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(acq.noise_seed);
    let background = Background::new(acq.background_style, &mut rng, size);
    let noise = Normal::new(0.0, background.noise_sigma()).expect("finite sigma");
    let wood_noise = Normal::new(0.0, 3.0).expect("finite sigma");

    let center = [
        size / 2.0 + acq.translation[0],
        size / 2.0 + acq.translation[1],
    ];
    let to_canonical =
        |x: f64, y: f64| rotate_screen([x - center[0], y - center[1]], -acq.rotation_deg);

    let mut image = RgbImage::new(image_size, image_size);
    let mut mask = BinaryMask::zeros(image_size, image_size);
    const SUB: [f64; 2] = [0.25, 0.75];
    for py in 0..image_size {
        for px in 0..image_size {
            let (x, y) = (px as f64, py as f64);
            if renderer.inside(to_canonical(x + 0.5, y + 0.5)) {
                mask.set(px, py, true);
            }
            let mut acc = [0.0; 3];
            let mut wood_hits = 0;
            for sy in SUB {
                for sx in SUB {
                    let q = to_canonical(x + sx, y + sy);
                    let c = if renderer.inside(q) {
                        wood_hits += 1;
                        renderer.wood(q, acq.sawcut_noise)
                    } else {
                        background.color(x + sx, y + sy)
                    };
                    for k in 0..3 {
                        acc[k] += c[k] / 4.0;
                    }
                }
            }
            let sigma_mix = wood_hits as f64 / 4.0;
            let n: f64 = sigma_mix * wood_noise.sample(&mut rng)
                + (1.0 - sigma_mix) * noise.sample(&mut rng);
            let px_val =
                acc.map(|c| (c * acq.illumination_gain + n).round().clamp(0.0, 255.0) as u8);
            image.put_pixel(px, py, Rgb(px_val));
        }
    }

    let pith_rel = rotate_screen(spec.pith_offset, acq.rotation_deg);
    let truth = GroundTruth {
        mask,
        pith: [center[0] + pith_rel[0], center[1] + pith_rel[1]],
        class_label: ClassLabel::new(spec.log_id.clone(), spec.end),
    };
    Ok((image, truth))
}

/// Structural and appearance settings of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub dataset_tag: String,
    pub n_logs: usize,
    pub acquisitions_per_end: usize,
    pub image_size: u32,
    pub background_style: BackgroundStyle,
    pub gain_range: (f64, f64),
    pub sawcut_range: (f64, f64),
    pub ring_count_range: (usize, usize),
    /// CS radius as a fraction of the image size.
    pub radius_fraction: (f64, f64),
    /// Maximum CS translation as a fraction of the image size.
    pub max_translation: f64,
    /// Camera rotation added after every second acquisition.
    pub rotation_step_deg: f64,
}

impl Default for DatasetProfile {
    fn default() -> Self {
        Self {
            dataset_tag: "SYN".into(),
            n_logs: 8,
            acquisitions_per_end: 4,
            image_size: 512,
            background_style: BackgroundStyle::Sawmill,
            gain_range: (0.85, 1.15),
            sawcut_range: (0.1, 0.4),
            ring_count_range: (18, 32),
            radius_fraction: (0.28, 0.38),
            max_translation: 0.03,
            rotation_step_deg: 45.0,
        }
    }
}

impl DatasetProfile {
    /// Named presets mirroring the structure of the forest, sawmill and disc datasets.
    pub fn preset(name: &str) -> Option<Self> {
        let base = Self::default();
        let p = match name {
            "default" => base,
            "hldb-fh" | "hldb-fl" => Self {
                dataset_tag: name[5..].to_uppercase(),
                n_logs: 100,
                acquisitions_per_end: 4,
                background_style: BackgroundStyle::Forest,
                gain_range: (0.7, 1.3),
                sawcut_range: (0.4, 0.9),
                ..base
            },
            "hldb-sm" => Self {
                dataset_tag: "SM".into(),
                n_logs: 100,
                acquisitions_per_end: 3,
                background_style: BackgroundStyle::Sawmill,
                sawcut_range: (0.3, 0.7),
                ..base
            },
            "hldb-r" | "hldb-s" => Self {
                dataset_tag: name[5..].to_uppercase(),
                n_logs: 100,
                acquisitions_per_end: if name == "hldb-r" { 4 } else { 6 },
                background_style: BackgroundStyle::Studio,
                gain_range: (0.95, 1.05),
                sawcut_range: if name == "hldb-r" {
                    (0.2, 0.5)
                } else {
                    (0.0, 0.05)
                },
                max_translation: 0.0,
                ..base
            },
            "mva" => Self {
                dataset_tag: "MVA".into(),
                n_logs: 279,
                acquisitions_per_end: 4,
                ..base
            },
            _ => return None,
        };
        Some(p)
    }

    /// Small images with few, wide rings for fast end-to-end runs.
    pub fn desk(
        dataset_tag: impl Into<String>,
        n_logs: usize,
        acquisitions_per_end: usize,
    ) -> Self {
        Self {
            dataset_tag: dataset_tag.into(),
            n_logs,
            acquisitions_per_end,
            image_size: 160,
            ring_count_range: (6, 11),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_logs < 8 {
            return Err(Error::InvalidSpec(format!(
                "n_logs {} < 8; four folds need two logs each",
                self.n_logs
            )));
        }
        if self.acquisitions_per_end == 0 {
            return Err(Error::InvalidSpec(
                "acquisitions_per_end must be positive".into(),
            ));
        }
        if self.dataset_tag.is_empty() || self.dataset_tag.contains(['/', '\\']) {
            return Err(Error::InvalidSpec(format!(
                "bad dataset tag {:?}",
                self.dataset_tag
            )));
        }
        let (lo, hi) = self.radius_fraction;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidSpec(
                "radius_fraction must be an increasing positive range".into(),
            ));
        }
        let needed = 2.0 * hi * self.image_size as f64
            + 20.0
            + 2.0 * self.max_translation * self.image_size as f64;
        if needed > self.image_size as f64 {
            return Err(Error::InvalidSpec(format!(
                "image size {} too small for radius fraction {hi} and translation {}",
                self.image_size, self.max_translation
            )));
        }
        Ok(())
    }
}

/// One planned acquisition, before rendering.
#[derive(Debug, Clone)]
pub struct PlannedAcquisition {
    pub id: AcquisitionId,
    pub log: LogSpec,
    pub acquisition: AcquisitionSpec,
}

/// Draws every log end and acquisition of a dataset. Cheap; no rendering.
pub fn plan_dataset(profile: &DatasetProfile, seed: u64) -> Result<Vec<PlannedAcquisition>> {
    profile.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(seed ^ tag_salt(&profile.dataset_tag));
    let width = profile.n_logs.saturating_sub(1).to_string().len().max(3);
    let size = profile.image_size as f64;
    let radius = (
        profile.radius_fraction.0 * size,
        profile.radius_fraction.1 * size,
    );
    let jitter = Normal::new(0.0, 3.0).expect("finite sigma");

    let mut plan = Vec::with_capacity(profile.n_logs * 2 * profile.acquisitions_per_end);
    for log in 0..profile.n_logs {
        let log_id = format!("log{log:0width$}");
        let log_seed = master.next_u64();
        for end in End::BOTH {
            let mut rng = ChaCha8Rng::seed_from_u64(log_seed ^ end_salt(end));
            let spec = LogSpec::random(
                log_id.clone(),
                end,
                profile.ring_count_range,
                radius,
                &mut rng,
            );
            let base_rotation = rng.random_range(0.0..360.0);
            for acq_index in 0..profile.acquisitions_per_end {
                let step = profile.rotation_step_deg * (acq_index / 2) as f64;
                let rotation_deg =
                    (base_rotation + step + jitter.sample(&mut rng)).rem_euclid(360.0);
                let t_r = profile.max_translation * size * rng.random::<f64>().sqrt();
                let t_a = rng.random_range(0.0..TAU);
                let acquisition = AcquisitionSpec {
                    rotation_deg: if rotation_deg >= 360.0 {
                        0.0
                    } else {
                        rotation_deg
                    },
                    translation: [t_r * t_a.cos(), t_r * t_a.sin()],
                    background_style: profile.background_style,
                    illumination_gain: uniform(&mut rng, profile.gain_range),
                    sawcut_noise: uniform(&mut rng, profile.sawcut_range),
                    noise_seed: rng.next_u64(),
                };
                plan.push(PlannedAcquisition {
                    id: AcquisitionId::new(
                        profile.dataset_tag.clone(),
                        log_id.clone(),
                        end,
                        acq_index as u32,
                    ),
                    log: spec.clone(),
                    acquisition,
                });
            }
        }
    }
    Ok(plan)
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn tag_salt(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn end_salt(end: End) -> u64 {
    match end {
        End::Top => 0x5eed_0001,
        End::Bottom => 0x5eed_0002,
    }
}

impl PlannedAcquisition {
    pub fn render(&self, image_size: u32) -> Result<SynthSample> {
        let (image, truth) = generate_end(&self.log, &self.acquisition, image_size)?;
        Ok(SynthSample {
            id: self.id.clone(),
            image,
            truth,
        })
    }
}

/// Renders a whole dataset in memory. Meant for desk-scale sizes.
pub fn synthesize(profile: &DatasetProfile, seed: u64) -> Result<Vec<SynthSample>> {
    plan_dataset(profile, seed)?
        .iter()
        .map(|p| p.render(profile.image_size))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub log_id: String,
    pub end: End,
    pub acq_index: u32,
    pub dataset_tag: String,
    /// Paths relative to the dataset root.
    pub image: String,
    pub mask: String,
    pub pith: String,
}

impl ManifestEntry {
    pub fn id(&self) -> AcquisitionId {
        AcquisitionId::new(
            self.dataset_tag.clone(),
            self.log_id.clone(),
            self.end,
            self.acq_index,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_tag: String,
    pub seed: u64,
    pub profile: DatasetProfile,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PithFile {
    x: f64,
    y: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `<root>/<tag>/<log>/<end>/<acq>.png` plus mask, pith and a manifest.
pub fn generate_dataset(
    root: &Path,
    profile: &DatasetProfile,
    seed: u64,
) -> Result<DatasetManifest> {
    let plan = plan_dataset(profile, seed)?;
    let mut entries = Vec::with_capacity(plan.len());
    for planned in &plan {
        let sample = planned.render(profile.image_size)?;
        entries.push(write_sample(root, &sample)?);
    }
    let manifest = DatasetManifest {
        dataset_tag: profile.dataset_tag.clone(),
        seed,
        profile: profile.clone(),
        entries,
    };
    let path = root.join(&profile.dataset_tag).join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(io_at(&path))?;
    Ok(manifest)
}

fn write_sample(root: &Path, sample: &SynthSample) -> Result<ManifestEntry> {
    let id = &sample.id;
    let rel_dir = PathBuf::from(&id.log_id).join(id.end.as_str());
    let dir = root.join(&id.dataset_tag).join(&rel_dir);
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let stem = id.acq_index.to_string();
    let rel = |suffix: &str| {
        rel_dir
            .join(format!("{stem}{suffix}"))
            .to_string_lossy()
            .into_owned()
    };
    let entry = ManifestEntry {
        log_id: id.log_id.clone(),
        end: id.end,
        acq_index: id.acq_index,
        dataset_tag: id.dataset_tag.clone(),
        image: rel(".png"),
        mask: rel(".mask.png"),
        pith: rel(".pith.json"),
    };
    let base = root.join(&id.dataset_tag);
    sample.image.save(base.join(&entry.image))?;
    sample.truth.mask.to_luma().save(base.join(&entry.mask))?;
    let pith = PithFile {
        x: sample.truth.pith[0],
        y: sample.truth.pith[1],
    };
    let pith_path = base.join(&entry.pith);
    fs::write(&pith_path, serde_json::to_vec(&pith)?).map_err(io_at(&pith_path))?;
    Ok(entry)
}

pub fn read_manifest(root: &Path, dataset_tag: &str) -> Result<DatasetManifest> {
    let path = root.join(dataset_tag).join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(io_at(&path))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Loads one manifest entry back into memory.
pub fn load_sample(root: &Path, entry: &ManifestEntry) -> Result<SynthSample> {
    let base = root.join(&entry.dataset_tag);
    let image = image::open(base.join(&entry.image))?.to_rgb8();
    let mask = BinaryMask::from_luma(&image::open(base.join(&entry.mask))?.to_luma8());
    let pith_path = base.join(&entry.pith);
    let pith: PithFile = serde_json::from_slice(&fs::read(&pith_path).map_err(io_at(&pith_path))?)?;
    let id = entry.id();
    Ok(SynthSample {
        truth: GroundTruth {
            mask,
            pith: [pith.x, pith.y],
            class_label: id.label(),
        },
        id,
        image,
    })
}

pub fn load_dataset(root: &Path, dataset_tag: &str) -> Result<Vec<SynthSample>> {
    read_manifest(root, dataset_tag)?
        .entries
        .iter()
        .map(|e| load_sample(root, e))
        .collect()
}
