use std::path::Path;
use std::process::Command;

use logend::commands::{
    self, BaselineArgs, EmbedArgs, EvaluateArgs, MethodKind, ReportArgs, SegmentArgs, SynthArgs,
    TrainEmbedArgs,
};
use logend::config::ExperimentConfig;
use logend::embedding::{EmbeddingTable, TrainSchedule};
use logend::evaluation::{EerReport, Regime};
use logend::Error;

fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.segmentation.model.epochs = 2;
    c.embedding.model.input_side = 32;
    c.embedding.model.dim = 16;
    c.embedding.schedule = TrainSchedule {
        epochs: 2,
        ..TrainSchedule::default()
    };
    c
}

fn synth_to(config: &ExperimentConfig, root: &Path, tag: &str) {
    commands::synth(
        config,
        &SynthArgs {
            out: root.join("data"),
            profile: "desk".into(),
            tag: Some(tag.into()),
            n_logs: Some(8),
            acquisitions_per_end: Some(2),
            image_size: None,
        },
    )
    .unwrap();
}

fn segment_gt(config: &ExperimentConfig, root: &Path, tag: &str) -> std::path::PathBuf {
    let out = root.join(format!("patches-{tag}"));
    commands::segment(
        config,
        &SegmentArgs {
            data: root.join("data"),
            tag: tag.into(),
            out: out.clone(),
            model: None,
            train_tag: None,
            threshold: None,
            ground_truth: true,
        },
    )
    .unwrap();
    out
}

#[test]
fn baseline_workflow_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = small_config();
    synth_to(&config, root, "WF");
    assert!(root.join("data/WF/manifest.json").is_file());
    assert!(root.join("data/WF/run.json").is_file());

    let patches = segment_gt(&config, root, "WF");
    let (index, samples) = commands::load_patches(&patches).unwrap();
    assert_eq!((index.entries.len(), samples.len()), (32, 32));
    assert!(index.outcomes.iter().all(|o| o.failure.is_none()));
    assert!(samples
        .iter()
        .all(|s| s.mask.dimensions() == s.patch.pixels.dimensions()));
    assert!(patches.join("config.toml").is_file());

    let records = commands::baseline_extract(
        &config,
        &BaselineArgs {
            method: MethodKind::CircularGrid,
            patches: patches.clone(),
            out: root.join("grid"),
        },
    )
    .unwrap();
    assert_eq!(records.len(), 32);
    let tpl = std::fs::read_dir(root.join("grid/templates"))
        .unwrap()
        .count();
    assert_eq!(tpl, records.iter().filter(|r| r.error.is_none()).count());

    let report = commands::evaluate(
        &config,
        &EvaluateArgs {
            method: MethodKind::Iris,
            patches: patches.clone(),
            out: root.join("eval/iris"),
            regime: None,
            extra: Vec::new(),
        },
    )
    .unwrap();
    assert_eq!(
        (
            report.method.as_str(),
            report.regime.as_str(),
            report.folds.len()
        ),
        ("iris", "iris", 4)
    );
    for f in 0..4 {
        assert!(root.join(format!("eval/iris/scores/fold{f}.csv")).is_file());
    }
    assert_eq!(
        EerReport::read_json(&root.join("eval/iris/report.json")).unwrap(),
        report
    );

    let table = commands::report(&ReportArgs {
        inputs: vec![root.join("eval")],
        out: root.join("table.txt"),
    })
    .unwrap();
    assert!(table.contains("iris") && table.contains("WF"), "{table}");
    assert_eq!(
        std::fs::read_to_string(root.join("table.txt")).unwrap(),
        table
    );
}

#[test]
fn embedder_workflow_with_extra_training_data() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = small_config();
    synth_to(&config, root, "MAIN");
    synth_to(&config, root, "XTRA");
    let main = segment_gt(&config, root, "MAIN");
    let extra = segment_gt(&config, root, "XTRA");

    let model = commands::train_embed(
        &config,
        &TrainEmbedArgs {
            patches: main.clone(),
            out: root.join("model"),
            extra: vec![extra.to_string_lossy().into_owned()],
        },
    )
    .unwrap();
    let table = commands::embed(
        &config,
        &EmbedArgs {
            model,
            patches: main.clone(),
            out: root.join("emb"),
        },
    )
    .unwrap();
    assert_eq!(table.rows.len(), 32);
    let csv = EmbeddingTable::read_csv(&root.join("emb/embeddings.csv")).unwrap();
    let blob = EmbeddingTable::read_blob(&root.join("emb/embeddings.bin")).unwrap();
    assert_eq!(csv, blob);
    for (stored, live) in blob.rows.iter().zip(&table.rows) {
        assert_eq!(stored.id, live.id);
        for (a, b) in stored
            .embedding
            .values()
            .iter()
            .zip(live.embedding.values())
        {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    let report = commands::evaluate(
        &config,
        &EvaluateArgs {
            method: MethodKind::Embedder,
            patches: main.clone(),
            out: root.join("eval"),
            regime: None,
            extra: vec![extra.to_string_lossy().into_owned()],
        },
    )
    .unwrap();
    assert_eq!(report.regime, Regime::SqNetPlus.to_string());
    assert!(report.folds.iter().all(|f| f.train_samples == 24 + 32));
}

#[test]
fn inconsistent_regimes_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = small_config();
    synth_to(&config, root, "REG");
    let patches = segment_gt(&config, root, "REG");
    let args = |method, regime, extra: Vec<String>| EvaluateArgs {
        method,
        patches: patches.clone(),
        out: root.join("eval"),
        regime,
        extra,
    };
    let plus_without_extra = commands::evaluate(
        &config,
        &args(MethodKind::Embedder, Some(Regime::SqNetPlus), vec![]),
    );
    assert!(matches!(plus_without_extra, Err(Error::Config(_))));
    let plain_with_extra = commands::evaluate(
        &config,
        &args(
            MethodKind::Embedder,
            Some(Regime::SqNet),
            vec![patches.to_string_lossy().into_owned()],
        ),
    );
    assert!(matches!(plain_with_extra, Err(Error::Config(_))));
    let unknown_extra = commands::evaluate(
        &config,
        &args(MethodKind::Embedder, None, vec!["NOPE".into()]),
    );
    assert!(matches!(unknown_extra, Err(Error::Config(_))));
}

#[test]
fn trained_segmenter_path_records_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut config = small_config();
    config.segmentation.max_failure_rate = 1.0;
    synth_to(&config, root, "SEG");
    let index = commands::segment(
        &config,
        &SegmentArgs {
            data: root.join("data"),
            tag: "SEG".into(),
            out: root.join("seg"),
            model: None,
            train_tag: None,
            threshold: Some(0.5),
            ground_truth: false,
        },
    )
    .unwrap();
    assert_eq!(index.outcomes.len(), 32);
    assert_eq!(index.threshold, Some(0.5));
    let acc = index.mean_pixel_accuracy.unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(root.join("seg/segmenter.safetensors").is_file());
}

fn logend() -> Command {
    Command::new(env!("CARGO_BIN_EXE_logend"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let status = logend()
        .args([
            "--config",
            bad.to_str().unwrap(),
            "report",
            "x",
            "--out",
            "y",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(commands::EXIT_CONFIG));

    let missing = dir.path().join("missing");
    let status = logend()
        .args([
            "segment",
            "--data",
            missing.to_str().unwrap(),
            "--tag",
            "T",
            "--out",
        ])
        .arg(dir.path().join("o"))
        .arg("--ground-truth")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(commands::EXIT_DATA));

    let out = logend()
        .args([
            "synth",
            "--profile",
            "desk",
            "--tag",
            "BIN",
            "--logs",
            "8",
            "--acquisitions",
            "1",
            "--seed",
            "3",
            "--out",
        ])
        .arg(dir.path().join("data"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("data/BIN/run.json")).unwrap())
            .unwrap();
    assert_eq!(run["command"], "synth");
    assert_eq!(run["seed"], 3);
}
