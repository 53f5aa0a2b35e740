//! Embedding tables: CSV and a binary blob with a JSON header.
//!
//! Blob layout: `b"LEMB"`, little-endian `u32` header length, the JSON header,
//! then `rows × dim` little-endian `f32` values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_at, Error, Result};
use crate::sample::AcquisitionId;

use super::EmbeddingVector;

const MAGIC: &[u8; 4] = b"LEMB";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub id: AcquisitionId,
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    pub rows: Vec<EmbeddingRow>,
}

#[derive(Serialize, Deserialize)]
struct BlobHeader {
    dim: usize,
    rows: Vec<AcquisitionId>,
}

impl EmbeddingTable {
    fn dim(&self) -> Result<usize> {
        let dim = self.rows.first().map_or(0, |r| r.embedding.dim());
        if self.rows.iter().any(|r| r.embedding.dim() != dim) {
            return Err(Error::InvalidInput(
                "embedding rows differ in dimension".into(),
            ));
        }
        Ok(dim)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let dim = self.dim()?;
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![
            "log_id".to_string(),
            "end".into(),
            "acq_index".into(),
            "dataset_tag".into(),
        ];
        header.extend((0..dim).map(|i| format!("e{i}")));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.id.log_id.clone(),
                row.id.end.to_string(),
                row.id.acq_index.to_string(),
                row.id.dataset_tag.clone(),
            ];
            rec.extend(
                row.embedding
                    .values()
                    .iter()
                    .map(|v| (*v as f32).to_string()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(io_at(path))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() < 5 {
                return Err(Error::InvalidInput(format!(
                    "short embedding row in {}",
                    path.display()
                )));
            }
            let acq_index = rec[2]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad acq_index {:?}", &rec[2])))?;
            let id = AcquisitionId::new(&rec[3], &rec[0], rec[1].parse()?, acq_index);
            let values = rec
                .iter()
                .skip(4)
                .map(|v| v.parse::<f32>().map(f64::from))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("bad embedding value: {e}")))?;
            rows.push(EmbeddingRow {
                id,
                embedding: EmbeddingVector::new(values)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn to_blob(&self) -> Result<Vec<u8>> {
        let dim = self.dim()?;
        let header = serde_json::to_vec(&BlobHeader {
            dim,
            rows: self.rows.iter().map(|r| r.id.clone()).collect(),
        })?;
        let mut out = Vec::with_capacity(8 + header.len() + 4 * dim * self.rows.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for row in &self.rows {
            for v in row.embedding.values() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::InvalidInput("malformed embedding blob".into());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad());
        }
        let len = u32::from_le_bytes(bytes[4..8].try_into().map_err(|_| bad())?) as usize;
        let header: BlobHeader = serde_json::from_slice(bytes.get(8..8 + len).ok_or_else(bad)?)?;
        let body = &bytes[8 + len..];
        if body.len() != 4 * header.dim * header.rows.len() {
            return Err(bad());
        }
        let rows = header
            .rows
            .into_iter()
            .enumerate()
            .map(|(i, id)| {
                let values = body[4 * header.dim * i..4 * header.dim * (i + 1)]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                    .collect();
                Ok(EmbeddingRow {
                    id,
                    embedding: EmbeddingVector::new(values)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn write_blob(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_blob()?).map_err(io_at(path))
    }

    pub fn read_blob(path: &Path) -> Result<Self> {
        Self::from_blob(&fs::read(path).map_err(io_at(path))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::End;
    use proptest::prelude::*;

    fn table(values: Vec<Vec<f32>>) -> EmbeddingTable {
        EmbeddingTable {
            rows: values
                .into_iter()
                .enumerate()
                .map(|(i, v)| EmbeddingRow {
                    id: AcquisitionId::new(
                        "SYN",
                        format!("log{i:03}"),
                        if i % 2 == 0 { End::Top } else { End::Bottom },
                        i as u32,
                    ),
                    embedding: EmbeddingVector::new(v.into_iter().map(f64::from).collect())
                        .unwrap(),
                })
                .collect(),
        }
    }

    proptest! {
        #[test]
        fn blob_and_csv_preserve_f32_values(values in prop::collection::vec(prop::collection::vec(-10.0f32..10.0, 6), 1..5)) {
            let t = table(values);
            prop_assert_eq!(&EmbeddingTable::from_blob(&t.to_blob().unwrap()).unwrap(), &t);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("e.csv");
            t.write_csv(&p).unwrap();
            prop_assert_eq!(&EmbeddingTable::read_csv(&p).unwrap(), &t);
        }
    }

    #[test]
    fn corrupt_blobs_are_rejected() {
        let t = table(vec![vec![1.0, 2.0]]);
        let mut blob = t.to_blob().unwrap();
        blob.pop();
        assert!(EmbeddingTable::from_blob(&blob).is_err());
        assert!(EmbeddingTable::from_blob(b"NOPE1234").is_err());
    }
}
