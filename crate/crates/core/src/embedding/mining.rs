use crate::error::{Error, Result};
use crate::sample::ClassLabel;

use super::{squared_distance, EmbeddingVector};

/// Indices into a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Every triplet in the batch whose loss is strictly positive.
///
/// Negatives from the opposite end of the anchor's log are skipped. Returns an
/// empty list when the batch has no anchor-positive pair or no valid negative.
pub fn mine_hard_triplets(
    embeddings: &[EmbeddingVector],
    labels: &[ClassLabel],
    margin: f64,
) -> Result<Vec<Triplet>> {
    if embeddings.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} embeddings but {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    if !(margin > 0.0) {
        return Err(Error::InvalidInput(format!(
            "margin {margin} must be positive"
        )));
    }
    let n = embeddings.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(embeddings[i].values(), embeddings[j].values())?;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut out = Vec::new();
    for a in 0..n {
        let negatives: Vec<usize> = (0..n)
            .filter(|&k| labels[k] != labels[a] && !labels[k].is_opposite_end_of(&labels[a]))
            .collect();
        for p in (0..n).filter(|&p| p != a && labels[p] == labels[a]) {
            let d_ap = dist[a * n + p];
            out.extend(
                negatives
                    .iter()
                    .filter(|&&k| d_ap - dist[a * n + k] + margin > 0.0)
                    .map(|&k| Triplet {
                        anchor: a,
                        positive: p,
                        negative: k,
                    }),
            );
        }
    }
    Ok(out)
}
