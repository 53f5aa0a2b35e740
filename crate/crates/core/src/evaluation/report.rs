use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_at, Result};

use super::{PairCounts, ScoreRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub eer: f64,
    pub counts: PairCounts,
    pub mean_genuine_distance: f64,
    pub mean_impostor_distance: f64,
    pub train_samples: usize,
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerReport {
    pub method: String,
    /// `SqNet` / `SqNet+` for learned methods, otherwise the method name.
    pub regime: String,
    pub dataset: String,
    /// Which view of the data was scored; empty for the plain one.
    #[serde(default)]
    pub view: String,
    pub k: usize,
    pub fold_seed: u64,
    pub folds: Vec<FoldResult>,
    pub mean_eer: f64,
}

impl EerReport {
    pub fn new(
        method: impl Into<String>,
        regime: impl Into<String>,
        dataset: impl Into<String>,
        view: impl Into<String>,
        k: usize,
        fold_seed: u64,
        folds: Vec<FoldResult>,
    ) -> Self {
        let mean_eer = folds.iter().map(|f| f.eer).sum::<f64>() / folds.len().max(1) as f64;
        Self {
            method: method.into(),
            regime: regime.into(),
            dataset: dataset.into(),
            view: view.into(),
            k,
            fold_seed,
            folds,
            mean_eer,
        }
    }

    pub fn fold_eers(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.eer).collect()
    }

    /// Every fold has a smaller mean genuine than impostor distance.
    pub fn separates_every_fold(&self) -> bool {
        self.folds
            .iter()
            .all(|f| f.mean_genuine_distance < f.mean_impostor_distance)
    }

    fn row_label(&self) -> String {
        if self.view.is_empty() {
            self.regime.clone()
        } else {
            format!("{} [{}]", self.regime, self.view)
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?).map_err(io_at(path))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(
            &fs::read(path).map_err(io_at(path))?,
        )?)
    }
}

/// Mean EERs as a text table: one row per method/regime, one column per dataset.
pub fn render_table(reports: &[EerReport]) -> String {
    let mut datasets: Vec<&str> = reports.iter().map(|r| r.dataset.as_str()).collect();
    datasets.sort();
    datasets.dedup();
    let mut rows: BTreeMap<String, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in reports {
        rows.entry(r.row_label())
            .or_default()
            .insert(r.dataset.as_str(), r.mean_eer);
    }
    let width = rows
        .keys()
        .map(|k| k.len())
        .max()
        .unwrap_or(0)
        .max("Method".len());
    let cols: Vec<usize> = datasets.iter().map(|d| d.len().max(7)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "Method");
    for (d, w) in datasets.iter().zip(&cols) {
        let _ = write!(out, " | {d:>w$}");
    }
    out.push('\n');
    out.push_str(&"-".repeat(width));
    for w in &cols {
        out.push_str("-+-");
        out.push_str(&"-".repeat(*w));
    }
    out.push('\n');
    for (label, cells) in &rows {
        let _ = write!(out, "{label:<width$}");
        for (d, w) in datasets.iter().zip(&cols) {
            match cells.get(d) {
                Some(e) => {
                    let _ = write!(out, " | {:>w$}", format!("{:.2}%", 100.0 * e));
                }
                None => {
                    let _ = write!(out, " | {:>w$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Columns: probe_id, gallery_id, distance, label. Failed pairs have an empty distance.
pub fn write_scores_csv(path: &Path, records: &[ScoreRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["probe_id", "gallery_id", "distance", "label"])?;
    for r in records {
        w.write_record([
            r.probe_id.to_string(),
            r.gallery_id.to_string(),
            r.distance.map(|d| d.to_string()).unwrap_or_default(),
            r.label.to_string(),
        ])?;
    }
    w.flush().map_err(io_at(path))?;
    Ok(())
}
