//! Binary template files: `b"LTPL"`, little-endian `u32` header length, a
//! JSON header with geometry and config hash, then the payload (iris: code
//! bytes then validity bytes; grid: `f32` features then validity bytes).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_at, Error, Result};

use super::{CircularGridTemplate, IrisTemplate};

const MAGIC: &[u8; 4] = b"LTPL";

#[derive(Debug, Clone, PartialEq)]
pub enum Template {
    Iris(IrisTemplate),
    Grid(CircularGridTemplate),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Header {
    Iris {
        bands: usize,
        angular_positions: usize,
        bits_per_cell: usize,
        config_hash: String,
    },
    CircularGrid {
        bands: usize,
        cells_per_band: usize,
        descriptor_len: usize,
        band_radii: Vec<f64>,
        config_hash: String,
    },
}

impl Template {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (header, mut payload) = match self {
            Template::Iris(t) => {
                let mut p = t.code.clone();
                p.extend(t.valid.iter().map(|&v| v as u8));
                let h = Header::Iris {
                    bands: t.bands,
                    angular_positions: t.angular_positions,
                    bits_per_cell: t.bits_per_cell,
                    config_hash: t.config_hash.clone(),
                };
                (h, p)
            }
            Template::Grid(t) => {
                let mut p: Vec<u8> = t.features.iter().flat_map(|v| v.to_le_bytes()).collect();
                p.extend(t.valid.iter().map(|&v| v as u8));
                let h = Header::CircularGrid {
                    bands: t.bands,
                    cells_per_band: t.cells_per_band,
                    descriptor_len: t.descriptor_len,
                    band_radii: t.band_radii.clone(),
                    config_hash: t.config_hash.clone(),
                };
                (h, p)
            }
        };
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(8 + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.append(&mut payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::InvalidInput("malformed template file".into());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad());
        }
        let len = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
        let header: Header = serde_json::from_slice(bytes.get(8..8 + len).ok_or_else(bad)?)?;
        let body = &bytes[8 + len..];
        let flags = |b: &[u8]| b.iter().map(|&v| v != 0).collect::<Vec<_>>();
        match header {
            Header::Iris {
                bands,
                angular_positions,
                bits_per_cell,
                config_hash,
            } => {
                let cells = bands * angular_positions;
                if body.len() != cells * bits_per_cell + cells
                    || body[..cells * bits_per_cell].iter().any(|&b| b > 1)
                {
                    return Err(bad());
                }
                Ok(Template::Iris(IrisTemplate {
                    bands,
                    angular_positions,
                    bits_per_cell,
                    code: body[..cells * bits_per_cell].to_vec(),
                    valid: flags(&body[cells * bits_per_cell..]),
                    config_hash,
                }))
            }
            Header::CircularGrid {
                bands,
                cells_per_band,
                descriptor_len,
                band_radii,
                config_hash,
            } => {
                let cells = bands * cells_per_band;
                let nf = cells * descriptor_len * 4;
                if body.len() != nf + cells {
                    return Err(bad());
                }
                Ok(Template::Grid(CircularGridTemplate {
                    bands,
                    cells_per_band,
                    descriptor_len,
                    band_radii,
                    features: body[..nf]
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect(),
                    valid: flags(&body[nf..]),
                    config_hash,
                }))
            }
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(io_at(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(io_at(path))?)
    }

    pub fn config_hash(&self) -> &str {
        match self {
            Template::Iris(t) => &t.config_hash,
            Template::Grid(t) => &t.config_hash,
        }
    }
}
