//! Subcommand implementations behind the `logend` binary. Each command writes
//! a run record (`run.json` plus the effective `config.toml`) into its output
//! directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::baselines::{PithEstimate, Template};
use crate::config::ExperimentConfig;
use crate::embedding::{
    train_embedder, EmbedderModel, EmbeddingRow, EmbeddingTable, EMBEDDER_VERSION,
};
use crate::error::{io_at, Error, Result};
use crate::evaluation::{
    cross_validate, make_folds, render_table, write_scores_csv, EerReport, Regime,
};
use crate::mask::BinaryMask;
use crate::methods::{EmbedderMethod, GridMethod, IrisMethod};
use crate::pipeline::segment_samples;
use crate::sample::AcquisitionId;
use crate::segmentation::{
    train_segmenter, SegmentationOutcome, SegmentedSample, SegmenterModel, SquarePatch,
    SEGMENTER_VERSION,
};
use crate::synthgen::{generate_dataset, load_dataset, DatasetProfile, MANIFEST_FILE};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_PROTOCOL: i32 = 4;

/// Process exit code for an error: configuration, data and protocol errors
/// each get their own code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Protocol { .. } | Error::UndefinedEer(_) => EXIT_PROTOCOL,
        Error::InvalidSpec(_)
        | Error::InvalidInput(_)
        | Error::SegmentationFailed(_)
        | Error::Incomparable(_)
        | Error::Io { .. }
        | Error::Image(_)
        | Error::Json(_)
        | Error::Csv(_) => EXIT_DATA,
        Error::Tensor(_) => EXIT_FAILURE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Embedder,
    Iris,
    CircularGrid,
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedder" => Ok(Self::Embedder),
            "iris" => Ok(Self::Iris),
            "circular-grid" | "grid" => Ok(Self::CircularGrid),
            _ => Err(Error::Config(format!(
                "unknown method {s:?} (embedder, iris, circular-grid)"
            ))),
        }
    }
}

impl MethodKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Embedder => "embedder",
            Self::Iris => "iris",
            Self::CircularGrid => "circular-grid",
        }
    }
}

#[derive(Serialize)]
struct RunRecord<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    crate_version: &'static str,
    segmenter_version: &'static str,
    embedder_version: &'static str,
    details: T,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_at(dir))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?).map_err(io_at(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(
        &fs::read(path).map_err(io_at(path))?,
    )?)
}

/// Writes `run.json` and `config.toml` into `dir`.
pub fn write_run_record<T: Serialize>(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    details: T,
) -> Result<()> {
    create_dir(dir)?;
    let toml_path = dir.join("config.toml");
    fs::write(&toml_path, config.to_toml()?).map_err(io_at(&toml_path))?;
    write_json(
        &dir.join("run.json"),
        &RunRecord {
            command,
            seed: config.seed,
            crate_version: env!("CARGO_PKG_VERSION"),
            segmenter_version: SEGMENTER_VERSION,
            embedder_version: EMBEDDER_VERSION,
            details,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthArgs {
    pub out: PathBuf,
    /// Preset name (`default`, `hldb-fh`, `hldb-fl`, `hldb-sm`, `hldb-r`, `hldb-s`, `mva`) or `desk`.
    pub profile: String,
    pub tag: Option<String>,
    pub n_logs: Option<usize>,
    pub acquisitions_per_end: Option<usize>,
    pub image_size: Option<u32>,
}

pub fn resolve_profile(args: &SynthArgs) -> Result<DatasetProfile> {
    let mut p = if args.profile == "desk" {
        DatasetProfile::desk(args.tag.clone().unwrap_or_else(|| "SYN".into()), 16, 6)
    } else {
        DatasetProfile::preset(&args.profile)
            .ok_or_else(|| Error::Config(format!("unknown dataset profile {:?}", args.profile)))?
    };
    if let Some(tag) = &args.tag {
        p.dataset_tag = tag.clone();
    }
    if let Some(n) = args.n_logs {
        p.n_logs = n;
    }
    if let Some(a) = args.acquisitions_per_end {
        p.acquisitions_per_end = a;
    }
    if let Some(s) = args.image_size {
        p.image_size = s;
    }
    p.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(p)
}

/// Generates a synthetic dataset; returns the manifest path.
pub fn synth(config: &ExperimentConfig, args: &SynthArgs) -> Result<PathBuf> {
    let profile = resolve_profile(args)?;
    let manifest = generate_dataset(&args.out, &profile, config.seed)?;
    let dir = args.out.join(&profile.dataset_tag);
    write_run_record(&dir, "synth", config, args)?;
    info!(
        "wrote {} acquisitions to {}",
        manifest.entries.len(),
        dir.display()
    );
    Ok(dir.join(MANIFEST_FILE))
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentArgs {
    /// Dataset root holding `<tag>/manifest.json`.
    pub data: PathBuf,
    pub tag: String,
    pub out: PathBuf,
    /// Saved segmenter; trained from scratch when absent.
    pub model: Option<PathBuf>,
    /// Dataset whose ground truth trains the segmenter (defaults to `tag`).
    pub train_tag: Option<String>,
    /// Overrides the per-dataset threshold.
    pub threshold: Option<f32>,
    /// Use the ground-truth masks instead of a segmenter.
    pub ground_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub id: AcquisitionId,
    pub patch: String,
    pub mask: String,
    pub origin: [i64; 2],
    pub pixel_accuracy: Option<f64>,
}

/// Index written by `segment` and read by every later stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchIndex {
    pub dataset_tag: String,
    pub threshold: Option<f32>,
    pub border: u32,
    pub ground_truth: bool,
    pub entries: Vec<PatchEntry>,
    pub outcomes: Vec<SegmentationOutcome>,
    pub mean_pixel_accuracy: Option<f64>,
}

pub const PATCH_INDEX: &str = "patches.json";

pub fn segment(config: &ExperimentConfig, args: &SegmentArgs) -> Result<PatchIndex> {
    let samples = load_dataset(&args.data, &args.tag)?;
    create_dir(&args.out.join("patches"))?;
    create_dir(&args.out.join("masks"))?;
    let threshold = args
        .threshold
        .unwrap_or_else(|| config.segmentation.threshold_for(&args.tag));
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    let model = if args.ground_truth {
        None
    } else if let Some(path) = &args.model {
        Some(SegmenterModel::load(path)?)
    } else {
        let train_tag = args.train_tag.as_deref().unwrap_or(&args.tag);
        let train = if train_tag == args.tag {
            samples.clone()
        } else {
            load_dataset(&args.data, train_tag)?
        };
        let pairs: Vec<_> = train.iter().map(|s| (&s.image, &s.truth.mask)).collect();
        let mut seg_config = config.segmentation.model.clone();
        seg_config.seed = config.seed;
        info!(
            "training segmenter on {} images of {train_tag}",
            pairs.len()
        );
        let m = train_segmenter(&pairs, seg_config)?;
        m.save(&args.out.join("segmenter.safetensors"))?;
        Some(m)
    };

    let border = config.segmentation.border;
    let run = segment_samples(&samples, model.as_ref(), threshold, border)?;
    let mut entries = Vec::new();
    let mut accuracies = run.accuracies.iter();
    for (s, mask) in samples.iter().zip(&run.masks) {
        let accuracy = model.as_ref().and(accuracies.next().copied());
        let Some(mask) = mask else { continue };
        let stem = s.id.stem();
        mask.to_luma()
            .save(args.out.join("masks").join(format!("{stem}.mask.png")))?;
        entries.push((s.id.clone(), stem, accuracy));
    }
    let entries = entries
        .into_iter()
        .zip(&run.segmented)
        .map(|((id, stem, pixel_accuracy), seg)| {
            let patch = format!("patches/{stem}.patch.png");
            let mask = format!("patches/{stem}.patch-mask.png");
            seg.patch.pixels.save(args.out.join(&patch))?;
            seg.mask.to_luma().save(args.out.join(&mask))?;
            Ok(PatchEntry {
                id,
                patch,
                mask,
                origin: seg.patch.origin,
                pixel_accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let index = PatchIndex {
        dataset_tag: args.tag.clone(),
        threshold: model.as_ref().map(|_| threshold),
        border,
        ground_truth: args.ground_truth,
        entries,
        outcomes: run.outcomes.clone(),
        mean_pixel_accuracy: run.mean_accuracy(),
    };
    write_json(&args.out.join(PATCH_INDEX), &index)?;
    write_run_record(&args.out, "segment", config, args)?;

    if run.failure_rate() > config.segmentation.max_failure_rate {
        return Err(Error::SegmentationFailed(format!(
            "{} of {} acquisitions failed ({:.1}%)",
            run.failures(),
            samples.len(),
            100.0 * run.failure_rate()
        )));
    }
    Ok(index)
}

/// Reads a `segment` output directory back into memory.
pub fn load_patches(dir: &Path) -> Result<(PatchIndex, Vec<SegmentedSample>)> {
    let index: PatchIndex = read_json(&dir.join(PATCH_INDEX))?;
    let samples = index
        .entries
        .iter()
        .map(|e| {
            let patch = SquarePatch::from_image(image::open(dir.join(&e.patch))?.to_rgb8())?;
            let mask = BinaryMask::from_luma(&image::open(dir.join(&e.mask))?.to_luma8());
            Ok(SegmentedSample {
                id: e.id.clone(),
                patch: SquarePatch {
                    origin: e.origin,
                    source: Some(e.id.clone()),
                    ..patch
                },
                mask,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((index, samples))
}

/// A patch directory given directly, or the `patches` path of a configured dataset tag.
pub fn resolve_patch_dir(config: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(name);
    if direct.join(PATCH_INDEX).is_file() {
        return Ok(direct);
    }
    config
        .dataset(name)
        .and_then(|d| d.patches.clone())
        .ok_or_else(|| {
            Error::Config(format!(
                "{name:?} is neither a patch directory nor a dataset tag with patches"
            ))
        })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainEmbedArgs {
    pub patches: PathBuf,
    pub out: PathBuf,
    pub extra: Vec<String>,
}

pub const EMBEDDER_FILE: &str = "embedder.safetensors";

/// Trains one embedder on every patch (plus extra datasets); returns the model path.
pub fn train_embed(config: &ExperimentConfig, args: &TrainEmbedArgs) -> Result<PathBuf> {
    let (_, mut samples) = load_patches(&args.patches)?;
    for name in &args.extra {
        let (_, extra) = load_patches(&resolve_patch_dir(config, name)?)?;
        samples.extend(extra.into_iter().map(|mut s| {
            s.id.log_id = format!("{}:{}", s.id.dataset_tag, s.id.log_id);
            s
        }));
    }
    let mut model_config = config.embedding.model.clone();
    model_config.seed = config.seed;
    let model = EmbedderModel::new(model_config)?;
    let set: Vec<_> = samples.iter().map(|s| (&s.patch, s.id.label())).collect();
    let (model, stats) = train_embedder(model, &set, &config.embedding.schedule, config.seed)?;
    create_dir(&args.out)?;
    let path = args.out.join(EMBEDDER_FILE);
    model.save(&path)?;
    write_json(&args.out.join("training.json"), &stats)?;
    write_run_record(&args.out, "train-embed", config, args)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbedArgs {
    pub model: PathBuf,
    pub patches: PathBuf,
    pub out: PathBuf,
}

/// Writes `embeddings.csv` and `embeddings.bin`.
pub fn embed(config: &ExperimentConfig, args: &EmbedArgs) -> Result<EmbeddingTable> {
    let model = EmbedderModel::load(&args.model)?;
    let (_, samples) = load_patches(&args.patches)?;
    let vectors = model.embed_batch(&samples.iter().map(|s| &s.patch).collect::<Vec<_>>())?;
    let table = EmbeddingTable {
        rows: samples
            .iter()
            .zip(vectors)
            .map(|(s, embedding)| EmbeddingRow {
                id: s.id.clone(),
                embedding,
            })
            .collect(),
    };
    create_dir(&args.out)?;
    table.write_csv(&args.out.join("embeddings.csv"))?;
    table.write_blob(&args.out.join("embeddings.bin"))?;
    write_run_record(&args.out, "embed", config, args)?;
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineArgs {
    pub method: MethodKind,
    pub patches: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PithRecord {
    pub id: AcquisitionId,
    pub pith: Option<PithEstimate>,
    pub error: Option<String>,
}

/// Writes one template file per patch under `templates/` plus `piths.json`.
pub fn baseline_extract(config: &ExperimentConfig, args: &BaselineArgs) -> Result<Vec<PithRecord>> {
    let (_, samples) = load_patches(&args.patches)?;
    let dir = args.out.join("templates");
    create_dir(&dir)?;
    let ext = args.method.as_str();
    let mut records = Vec::new();
    for s in &samples {
        let result = match args.method {
            MethodKind::Iris => IrisMethod::new(&config.baselines)
                .template(s)
                .map(|(p, t)| (p, Template::Iris(t))),
            MethodKind::CircularGrid => GridMethod::new(&config.baselines)
                .template(s)
                .map(|(p, t)| (p, Template::Grid(t))),
            MethodKind::Embedder => {
                return Err(Error::Config(
                    "baseline-extract takes iris or circular-grid".into(),
                ));
            }
        };
        match result {
            Ok((pith, template)) => {
                template.write(&dir.join(format!("{}.{ext}.tpl", s.id.stem())))?;
                records.push(PithRecord {
                    id: s.id.clone(),
                    pith: Some(pith),
                    error: None,
                });
            }
            Err(e) => {
                warn!("{}: {e}", s.id);
                records.push(PithRecord {
                    id: s.id.clone(),
                    pith: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    write_json(&args.out.join("piths.json"), &records)?;
    write_run_record(&args.out, "baseline-extract", config, args)?;
    Ok(records)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateArgs {
    pub method: MethodKind,
    pub patches: PathBuf,
    pub out: PathBuf,
    pub regime: Option<Regime>,
    /// Patch directories or dataset tags added to every training split.
    pub extra: Vec<String>,
}

pub const REPORT_FILE: &str = "report.json";

pub fn evaluate(config: &ExperimentConfig, args: &EvaluateArgs) -> Result<EerReport> {
    let (index, samples) = load_patches(&args.patches)?;
    let regime = args.regime.unwrap_or(if args.extra.is_empty() {
        config.evaluation.regime
    } else {
        Regime::SqNetPlus
    });
    let extra_names = if args.extra.is_empty() && regime == Regime::SqNetPlus {
        config.evaluation.extra_train.clone()
    } else {
        args.extra.clone()
    };
    match (regime, extra_names.is_empty()) {
        (Regime::SqNetPlus, true) => {
            return Err(Error::Config(
                "regime SqNet+ needs extra training data".into(),
            ))
        }
        (Regime::SqNet, false) => {
            return Err(Error::Config(
                "extra training data given with regime SqNet".into(),
            ))
        }
        _ => {}
    }
    if args.method != MethodKind::Embedder && regime == Regime::SqNetPlus {
        return Err(Error::Config("SqNet+ applies to the embedder only".into()));
    }
    let mut extra = Vec::new();
    for name in &extra_names {
        extra.extend(load_patches(&resolve_patch_dir(config, name)?)?.1);
    }
    let extra = (!extra.is_empty()).then_some(extra.as_slice());

    let logs: Vec<String> = samples.iter().map(|s| s.id.log_id.clone()).collect();
    let folds = make_folds(&logs, config.evaluation.k, config.evaluation.fold_seed)?;
    let tag = index.dataset_tag.as_str();
    let eval = match args.method {
        MethodKind::Embedder => {
            let mut m = EmbedderMethod::new(config.embedding.clone(), config.seed);
            cross_validate(tag, &samples, &folds, &mut m, extra)?
        }
        MethodKind::Iris => cross_validate(
            tag,
            &samples,
            &folds,
            &mut IrisMethod::new(&config.baselines),
            None,
        )?,
        MethodKind::CircularGrid => cross_validate(
            tag,
            &samples,
            &folds,
            &mut GridMethod::new(&config.baselines),
            None,
        )?,
    };
    create_dir(&args.out.join("scores"))?;
    for (f, records) in eval.scores.iter().enumerate() {
        write_scores_csv(
            &args.out.join("scores").join(format!("fold{f}.csv")),
            records,
        )?;
    }
    write_json(&args.out.join("folds.json"), &folds)?;
    eval.report.write_json(&args.out.join(REPORT_FILE))?;
    let table = render_table(std::slice::from_ref(&eval.report));
    let txt = args.out.join("report.txt");
    fs::write(&txt, &table).map_err(io_at(&txt))?;
    write_run_record(&args.out, "evaluate", config, args)?;
    Ok(eval.report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportArgs {
    /// Report files, or directories searched (one level deep) for `report.json`.
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
}

/// Collects reports into one table; writes it to `out` (a file, or `table.txt` in a directory).
pub fn report(args: &ReportArgs) -> Result<String> {
    let mut paths = Vec::new();
    for input in &args.inputs {
        if input.is_file() {
            paths.push(input.clone());
        } else if input.join(REPORT_FILE).is_file() {
            paths.push(input.join(REPORT_FILE));
        } else {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(io_at(input))?
                .filter_map(|e| e.ok().map(|e| e.path().join(REPORT_FILE)))
                .filter(|p| p.is_file())
                .collect();
            found.sort();
            paths.extend(found);
        }
    }
    if paths.is_empty() {
        return Err(Error::InvalidInput("no reports found".into()));
    }
    let reports = paths
        .iter()
        .map(|p| EerReport::read_json(p))
        .collect::<Result<Vec<_>>>()?;
    let table = render_table(&reports);
    let target = if args.out.is_dir() {
        args.out.join("table.txt")
    } else {
        args.out.clone()
    };
    if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(&target, &table).map_err(io_at(&target))?;
    Ok(table)
}
