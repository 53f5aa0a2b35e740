//! Verification protocol: log-disjoint folds, pair labels, all-pairs scoring
//! within a fold, and the equal error rate.
//!
//! The two ends of a log are different identities. Comparisons between them
//! are kept in the score records as `excluded` but never reach an EER.

mod eer;
mod protocol;
mod report;

pub use eer::compute_eer;
pub use protocol::{cross_validate, cross_validate_views, Evaluation, Regime, VerificationMethod};
pub use report::{render_table, write_scores_csv, EerReport, FoldResult};

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::AcquisitionId;

/// Log id → fold index. Every acquisition of a log shares its fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub folds: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, log_id: &str) -> Option<usize> {
        self.folds.get(log_id).copied()
    }

    pub fn logs_in(&self, fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .filter(|(_, f)| **f == fold)
            .map(|(l, _)| l.as_str())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for f in self.folds.values() {
            sizes[*f] += 1;
        }
        sizes
    }
}

/// Seeded random partition of the distinct logs into `k` folds whose sizes
/// differ by at most one.
pub fn make_folds(log_ids: &[String], k: usize, seed: u64) -> Result<FoldAssignment> {
    let mut logs: Vec<&String> = log_ids.iter().collect();
    logs.sort();
    logs.dedup();
    if k == 0 || logs.len() < k {
        return Err(Error::InvalidInput(format!(
            "cannot split {} logs into {k} folds",
            logs.len()
        )));
    }
    logs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(FoldAssignment {
        k,
        seed,
        folds: logs
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i % k))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Genuine,
    Impostor,
    Excluded,
}

impl PairLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PairLabel::Genuine => "genuine",
            PairLabel::Impostor => "impostor",
            PairLabel::Excluded => "excluded",
        }
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Same log and end: genuine. Same log, other end: excluded. Otherwise impostor.
pub fn label_pair(a: &AcquisitionId, b: &AcquisitionId) -> Result<PairLabel> {
    if a == b {
        return Err(Error::InvalidInput(format!("{a} compared with itself")));
    }
    Ok(if a.log_id != b.log_id {
        PairLabel::Impostor
    } else if a.end == b.end {
        PairLabel::Genuine
    } else {
        PairLabel::Excluded
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub probe_id: AcquisitionId,
    pub gallery_id: AcquisitionId,
    /// `None` when the comparison failed; see `error`.
    pub distance: Option<f64>,
    pub label: PairLabel,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub genuine: usize,
    pub impostor: usize,
    pub excluded: usize,
    /// Pairs whose comparison failed; not part of the other counts.
    pub failed: usize,
}

impl PairCounts {
    pub fn of(records: &[ScoreRecord]) -> Self {
        let mut c = Self::default();
        for r in records {
            match (r.distance, r.label) {
                (None, _) => c.failed += 1,
                (Some(_), PairLabel::Genuine) => c.genuine += 1,
                (Some(_), PairLabel::Impostor) => c.impostor += 1,
                (Some(_), PairLabel::Excluded) => c.excluded += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.genuine + self.impostor + self.excluded + self.failed
    }
}

/// Scores every unordered pair of `items` once. A failing comparison yields a
/// record with an error marker instead of a distance.
pub fn score_fold<T>(
    items: &[(AcquisitionId, T)],
    mut compare: impl FnMut(&T, &T) -> Result<f64>,
) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::with_capacity(items.len() * items.len().saturating_sub(1) / 2);
    for (i, (a, ta)) in items.iter().enumerate() {
        for (b, tb) in &items[i + 1..] {
            let label = label_pair(a, b)?;
            let (distance, error) = match compare(ta, tb) {
                Ok(d) if d.is_finite() && d >= 0.0 => (Some(d), None),
                Ok(d) => (None, Some(format!("invalid distance {d}"))),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(ScoreRecord {
                probe_id: a.clone(),
                gallery_id: b.clone(),
                distance,
                label,
                error,
            });
        }
    }
    Ok(out)
}

/// Genuine and impostor distances of scored records; excluded and failed
/// pairs are dropped.
pub fn split_scores(records: &[ScoreRecord]) -> (Vec<f64>, Vec<f64>) {
    let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
    for r in records {
        match (r.label, r.distance) {
            (PairLabel::Genuine, Some(d)) => genuine.push(d),
            (PairLabel::Impostor, Some(d)) => impostor.push(d),
            _ => {}
        }
    }
    (genuine, impostor)
}

/// EER of one fold's records; a fold without genuine or impostor scores is a
/// protocol error.
pub fn fold_eer(fold: usize, records: &[ScoreRecord]) -> Result<f64> {
    let counts = PairCounts::of(records);
    if counts.failed > 0 {
        warn!(
            "fold {fold}: {} comparisons failed and are left out of the EER",
            counts.failed
        );
    }
    let (genuine, impostor) = split_scores(records);
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Protocol {
            fold,
            reason: format!(
                "{} genuine and {} impostor scores",
                genuine.len(),
                impostor.len()
            ),
        });
    }
    compute_eer(&genuine, &impostor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::End;

    fn ids(logs: usize, acqs: u32) -> Vec<AcquisitionId> {
        let mut out = Vec::new();
        for l in 0..logs {
            for end in End::BOTH {
                for a in 0..acqs {
                    out.push(AcquisitionId::new("SYN", format!("log{l}"), end, a));
                }
            }
        }
        out
    }

    /// Reference counts from the definitions alone.
    fn brute_force_counts(ids: &[AcquisitionId]) -> (usize, usize, usize) {
        let (mut g, mut e, mut i) = (0, 0, 0);
        for a in 0..ids.len() {
            for b in a + 1..ids.len() {
                let same_log = ids[a].log_id == ids[b].log_id;
                let same_end = ids[a].end == ids[b].end;
                match (same_log, same_end) {
                    (true, true) => g += 1,
                    (true, false) => e += 1,
                    _ => i += 1,
                }
            }
        }
        (g, e, i)
    }

    #[test]
    fn fold_sizes_are_balanced() {
        let logs: Vec<String> = (0..279).map(|i| format!("log{i:03}")).collect();
        let f = make_folds(&logs, 4, 7).unwrap();
        let mut sizes = f.sizes();
        sizes.sort();
        assert_eq!(sizes, vec![69, 70, 70, 70]);
        assert_eq!(f, make_folds(&logs, 4, 7).unwrap());
        assert_ne!(f, make_folds(&logs, 4, 8).unwrap());

        let eight: Vec<String> = (0..8).map(|i| format!("l{i}")).collect();
        assert_eq!(make_folds(&eight, 4, 0).unwrap().sizes(), vec![2, 2, 2, 2]);
        assert!(matches!(
            make_folds(&eight[..3], 4, 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn labels_follow_the_rules() {
        let a = AcquisitionId::new("SYN", "log7", End::Top, 0);
        let b = AcquisitionId::new("SYN", "log7", End::Top, 1);
        let c = AcquisitionId::new("SYN", "log7", End::Bottom, 0);
        let d = AcquisitionId::new("SYN", "log9", End::Bottom, 0);
        assert_eq!(label_pair(&a, &b).unwrap(), PairLabel::Genuine);
        assert_eq!(label_pair(&a, &c).unwrap(), PairLabel::Excluded);
        assert_eq!(label_pair(&a, &d).unwrap(), PairLabel::Impostor);
        assert!(label_pair(&a, &a).is_err());
    }

    #[test]
    fn small_fold_counts() {
        let items: Vec<_> = ids(2, 2).into_iter().map(|id| (id, 0.0)).collect();
        let records = score_fold(&items, |_, _| Ok(1.0)).unwrap();
        assert_eq!(records.len(), 28);
        let c = PairCounts::of(&records);
        assert_eq!(
            (c.genuine, c.excluded, c.impostor),
            brute_force_counts(&ids(2, 2))
        );
        assert_eq!((c.genuine, c.excluded, c.impostor), (4, 8, 16));
    }

    #[test]
    fn partition_covers_every_pair() {
        for (logs, acqs) in [(1, 3), (3, 2), (4, 3), (5, 1)] {
            let all = ids(logs, acqs);
            let items: Vec<_> = all.iter().cloned().map(|id| (id, ())).collect();
            let records = score_fold(&items, |_, _| Ok(0.5)).unwrap();
            let n = all.len();
            assert_eq!(records.len(), n * (n - 1) / 2);
            let c = PairCounts::of(&records);
            assert_eq!(c.total(), records.len());
            assert_eq!(
                (c.genuine, c.excluded, c.impostor),
                brute_force_counts(&all)
            );
        }
    }

    #[test]
    fn failures_are_marked_and_dropped() {
        let items: Vec<_> = ids(2, 2)
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect();
        let records = score_fold(&items, |a, b| {
            if *a == 0 {
                Err(Error::Incomparable("nope".into()))
            } else {
                Ok((*a as f64 - *b as f64).abs())
            }
        })
        .unwrap();
        let c = PairCounts::of(&records);
        assert_eq!(c.failed, 7);
        assert!(records
            .iter()
            .filter(|r| r.distance.is_none())
            .all(|r| r.error.is_some()));
        assert!(fold_eer(0, &records).is_ok());
    }

    #[test]
    fn single_class_fold_is_a_protocol_error() {
        let items: Vec<_> = (0..3)
            .map(|a| (AcquisitionId::new("SYN", "log1", End::Top, a), ()))
            .collect();
        let records = score_fold(&items, |_, _| Ok(0.1)).unwrap();
        assert_eq!(PairCounts::of(&records).impostor, 0);
        assert!(matches!(
            fold_eer(2, &records),
            Err(Error::Protocol { fold: 2, .. })
        ));
    }

    #[test]
    fn excluded_pairs_never_change_the_eer() {
        let all = ids(3, 3);
        let items: Vec<_> = all
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let dist = |a: &usize, b: &usize| Ok(((a * 7 + b * 13) % 17) as f64);
        let records = score_fold(&items, dist).unwrap();
        let kept: Vec<_> = records
            .iter()
            .filter(|r| r.label != PairLabel::Excluded)
            .cloned()
            .collect();
        assert_eq!(
            fold_eer(0, &records).unwrap().to_bits(),
            fold_eer(0, &kept).unwrap().to_bits()
        );
    }
}
