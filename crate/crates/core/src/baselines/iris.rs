use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{sha256_json, PolarImage};

/// Default circular shift range of the matcher, in angular positions.
pub const DEFAULT_MAX_SHIFT: usize = 21;

/// 1-D log-Gabor filter bank applied along the angular axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogGaborConfig {
    /// Center wavelength of the first scale, in angular samples.
    pub wavelength: f64,
    /// Bandwidth ratio σ/f.
    pub sigma_on_f: f64,
    pub scales: usize,
    /// Wavelength ratio between consecutive scales.
    pub scale_multiplier: f64,
}

impl Default for LogGaborConfig {
    fn default() -> Self {
        Self {
            wavelength: 64.0,
            sigma_on_f: 0.5,
            scales: 1,
            scale_multiplier: 2.0,
        }
    }
}

/// Binary iris-style code, `bands × angular_positions × bits_per_cell`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrisTemplate {
    pub bands: usize,
    pub angular_positions: usize,
    pub bits_per_cell: usize,
    pub code: Vec<u8>,
    /// Per `(band, angle)` cell.
    pub valid: Vec<bool>,
    pub config_hash: String,
}

#[derive(Serialize)]
struct HashInput<'a> {
    kind: &'static str,
    bands: usize,
    angular_positions: usize,
    config: &'a LogGaborConfig,
}

impl IrisTemplate {
    pub fn bit(&self, band: usize, col: usize, k: usize) -> u8 {
        self.code[(band * self.angular_positions + col) * self.bits_per_cell + k]
    }

    /// Cell `c` of the result is cell `c - s` of `self` (circularly).
    pub fn shifted(&self, s: i64) -> Self {
        let (n, bits) = (self.angular_positions, self.bits_per_cell);
        let mut out = self.clone();
        for b in 0..self.bands {
            for c in 0..n {
                let src = (c as i64 - s).rem_euclid(n as i64) as usize;
                let (dst_i, src_i) = (b * n + c, b * n + src);
                out.valid[dst_i] = self.valid[src_i];
                out.code[dst_i * bits..(dst_i + 1) * bits]
                    .copy_from_slice(&self.code[src_i * bits..(src_i + 1) * bits]);
            }
        }
        out
    }
}

impl LogGaborConfig {
    pub fn validate(&self, angular_positions: usize) -> Result<()> {
        let top = self.wavelength
            * self
                .scale_multiplier
                .powi(self.scales.saturating_sub(1) as i32);
        if self.scales == 0 || !(self.wavelength >= 2.0) || !(top <= angular_positions as f64) {
            return Err(Error::InvalidInput(format!(
                "log-Gabor wavelengths {}..{top} do not fit {angular_positions} angular samples",
                self.wavelength
            )));
        }
        if !(self.sigma_on_f > 0.0 && self.sigma_on_f < 1.0)
            || !(self.scale_multiplier > 1.0 || self.scales == 1)
        {
            return Err(Error::InvalidInput(
                "log-Gabor bandwidth or scale ratio out of range".into(),
            ));
        }
        Ok(())
    }

    pub fn hash(&self, bands: usize, angular_positions: usize) -> String {
        sha256_json(&HashInput {
            kind: "iris",
            bands,
            angular_positions,
            config: self,
        })
    }
}

/// Filters every band row circularly (via FFT) and keeps the signs of the real
/// and imaginary responses. Responses within a small relative tolerance of
/// zero encode as 0.
pub fn log_gabor_encode(polar: &PolarImage, config: &LogGaborConfig) -> Result<IrisTemplate> {
    let n = polar.angular_positions;
    config.validate(n)?;
    let bits = 2 * config.scales;
    let mut code = vec![0u8; polar.bands * n * bits];
    let mut planner = FftPlanner::<f64>::new();
    let (fwd, inv) = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    let filters: Vec<Vec<f64>> = (0..config.scales)
        .map(|s| {
            let f0 = 1.0 / (config.wavelength * config.scale_multiplier.powi(s as i32));
            let denom = 2.0 * config.sigma_on_f.ln().powi(2);
            (0..n)
                .map(|k| {
                    // positive frequencies only, no DC or Nyquist: an analytic response
                    if k == 0 || 2 * k >= n {
                        0.0
                    } else {
                        let f = k as f64 / n as f64;
                        (-(f / f0).ln().powi(2) / denom).exp()
                    }
                })
                .collect()
        })
        .collect();

    for b in 0..polar.bands {
        let row = polar.row(b);
        let valid = &polar.valid[b * n..(b + 1) * n];
        let count = valid.iter().filter(|v| **v).count();
        let fill = if count > 0 {
            row.iter()
                .zip(valid)
                .filter(|(_, v)| **v)
                .map(|(x, _)| *x as f64)
                .sum::<f64>()
                / count as f64
        } else {
            0.0
        };
        let signal: Vec<Complex<f64>> = row
            .iter()
            .zip(valid)
            .map(|(x, v)| Complex::new(if *v { *x as f64 } else { fill }, 0.0))
            .collect();
        let rms = (signal.iter().map(|c| c.re * c.re).sum::<f64>() / n as f64).sqrt();
        let eps = 1e-7 * rms.max(1e-12);
        let mut spectrum = signal;
        fwd.process(&mut spectrum);
        for (s, filter) in filters.iter().enumerate() {
            let mut resp: Vec<Complex<f64>> =
                spectrum.iter().zip(filter).map(|(c, g)| c * g).collect();
            inv.process(&mut resp);
            for (col, r) in resp.iter().enumerate() {
                let base = (b * n + col) * bits + 2 * s;
                code[base] = (r.re / n as f64 > eps) as u8;
                code[base + 1] = (r.im / n as f64 > eps) as u8;
            }
        }
    }
    Ok(IrisTemplate {
        bands: polar.bands,
        angular_positions: n,
        bits_per_cell: bits,
        code,
        valid: polar.valid.clone(),
        config_hash: config.hash(polar.bands, n),
    })
}

/// Minimum fractional Hamming distance over circular shifts `-max_shift..=max_shift`
/// of `t2`, counting only bits whose cells are valid in both templates.
pub fn iris_compare(t1: &IrisTemplate, t2: &IrisTemplate, max_shift: usize) -> Result<f64> {
    if (t1.bands, t1.angular_positions, t1.bits_per_cell)
        != (t2.bands, t2.angular_positions, t2.bits_per_cell)
    {
        return Err(Error::InvalidInput(format!(
            "iris template shapes differ: {}x{}x{} vs {}x{}x{}",
            t1.bands,
            t1.angular_positions,
            t1.bits_per_cell,
            t2.bands,
            t2.angular_positions,
            t2.bits_per_cell
        )));
    }
    if t1.config_hash != t2.config_hash {
        return Err(Error::Incomparable(
            "iris templates come from different configurations".into(),
        ));
    }
    let (n, bits) = (t1.angular_positions as i64, t1.bits_per_cell);
    let max_shift = (max_shift as i64).min(n / 2);
    let mut best: Option<f64> = None;
    for s in -max_shift..=max_shift {
        let (mut differ, mut total) = (0usize, 0usize);
        for b in 0..t1.bands {
            for c in 0..n {
                let i1 = b * n as usize + c as usize;
                let i2 = b * n as usize + (c - s).rem_euclid(n) as usize;
                if !(t1.valid[i1] && t2.valid[i2]) {
                    continue;
                }
                total += bits;
                differ += (0..bits)
                    .filter(|k| t1.code[i1 * bits + k] != t2.code[i2 * bits + k])
                    .count();
            }
        }
        if total > 0 {
            let hd = differ as f64 / total as f64;
            best = Some(best.map_or(hd, |b: f64| b.min(hd)));
        }
    }
    best.ok_or_else(|| Error::Incomparable("no mutually valid iris code bits".into()))
}
