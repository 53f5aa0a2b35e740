use std::fmt;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::SegmentedSample;

use super::report::{EerReport, FoldResult};
use super::{fold_eer, score_fold, split_scores, FoldAssignment, PairCounts, ScoreRecord};

/// Training regime of a learned method: own folds only, or with identities
/// from another dataset added to every training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "SqNet")]
    SqNet,
    #[serde(rename = "SqNet+")]
    SqNetPlus,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::SqNet => "SqNet",
            Regime::SqNetPlus => "SqNet+",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sqnet" => Ok(Regime::SqNet),
            "sqnet+" | "sqnet-plus" | "sqnetplus" => Ok(Regime::SqNetPlus),
            _ => Err(Error::Config(format!(
                "unknown regime {s:?} (expected sqnet or sqnet+)"
            ))),
        }
    }
}

/// Something that turns segmented samples into comparable templates.
pub trait VerificationMethod {
    type Template;

    fn name(&self) -> String;

    /// Whether `fit` learns anything; decides the regime tag of reports.
    fn learns(&self) -> bool {
        false
    }

    fn fit(&mut self, _fold: usize, _train: &[SegmentedSample]) -> Result<()> {
        Ok(())
    }

    fn extract(&self, sample: &SegmentedSample) -> Result<Self::Template>;

    fn extract_all(&self, samples: &[&SegmentedSample]) -> Vec<Result<Self::Template>> {
        samples.iter().map(|s| self.extract(s)).collect()
    }

    /// Symmetric, nonnegative; smaller means more similar.
    fn distance(&self, a: &Self::Template, b: &Self::Template) -> Result<f64>;
}

/// Report plus the raw per-fold score records of one evaluated view.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EerReport,
    pub scores: Vec<Vec<ScoreRecord>>,
}

/// Trains once per fold and evaluates the held-out fold.
pub fn cross_validate<M: VerificationMethod>(
    dataset: &str,
    samples: &[SegmentedSample],
    folds: &FoldAssignment,
    method: &mut M,
    extra_train: Option<&[SegmentedSample]>,
) -> Result<Evaluation> {
    let mut out = cross_validate_views(
        dataset,
        samples,
        &[("", samples)],
        folds,
        method,
        extra_train,
    )?;
    Ok(out.remove(0))
}

/// Like [`cross_validate`], but each fold's model is evaluated on several
/// views of the data (e.g. clean and perturbed masks). Training always uses
/// `train_view`.
pub fn cross_validate_views<M: VerificationMethod>(
    dataset: &str,
    train_view: &[SegmentedSample],
    eval_views: &[(&str, &[SegmentedSample])],
    folds: &FoldAssignment,
    method: &mut M,
    extra_train: Option<&[SegmentedSample]>,
) -> Result<Vec<Evaluation>> {
    let fold_of = |s: &SegmentedSample| {
        folds
            .fold_of(&s.id.log_id)
            .ok_or_else(|| Error::InvalidInput(format!("{} has no fold assignment", s.id)))
    };
    for s in train_view
        .iter()
        .chain(eval_views.iter().flat_map(|(_, v)| v.iter()))
    {
        fold_of(s)?;
    }
    // Extra identities must never collide with the dataset's own log ids.
    let extra: Vec<SegmentedSample> = extra_train
        .unwrap_or_default()
        .iter()
        .map(|s| {
            let mut q = s.clone();
            q.id.log_id = format!("{}:{}", s.id.dataset_tag, s.id.log_id);
            q
        })
        .collect();
    let regime = if method.learns() {
        if extra_train.is_some() {
            Regime::SqNetPlus
        } else {
            Regime::SqNet
        }
        .to_string()
    } else {
        method.name()
    };

    let mut per_view: Vec<(Vec<FoldResult>, Vec<Vec<ScoreRecord>>)> =
        eval_views.iter().map(|_| Default::default()).collect();
    for fold in 0..folds.k {
        let mut train = Vec::new();
        for s in train_view {
            if fold_of(s)? != fold {
                train.push(s.clone());
            }
        }
        train.extend(extra.iter().cloned());
        method.fit(fold, &train)?;

        for ((view, samples), (results, scores)) in eval_views.iter().zip(per_view.iter_mut()) {
            let mut test: Vec<&SegmentedSample> = Vec::new();
            for s in samples.iter() {
                if fold_of(s)? == fold {
                    test.push(s);
                }
            }
            let templates = method.extract_all(&test);
            let items: Vec<_> = test.iter().map(|s| s.id.clone()).zip(templates).collect();
            let records = score_fold(&items, |a, b| match (a, b) {
                (Ok(a), Ok(b)) => method.distance(a, b),
                (Err(e), _) | (_, Err(e)) => Err(Error::InvalidInput(format!("no template: {e}"))),
            })?;
            let eer = fold_eer(fold, &records)?;
            let (genuine, impostor) = split_scores(&records);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            info!(
                "{} {dataset}{view}: fold {fold} EER {:.4}",
                method.name(),
                eer
            );
            results.push(FoldResult {
                fold,
                eer,
                counts: PairCounts::of(&records),
                mean_genuine_distance: mean(&genuine),
                mean_impostor_distance: mean(&impostor),
                train_samples: train.len(),
                test_samples: test.len(),
            });
            scores.push(records);
        }
    }

    Ok(eval_views
        .iter()
        .zip(per_view)
        .map(|((view, _), (folds_out, scores))| Evaluation {
            report: EerReport::new(
                method.name(),
                regime.clone(),
                dataset,
                *view,
                folds.k,
                folds.seed,
                folds_out,
            ),
            scores,
        })
        .collect())
}
