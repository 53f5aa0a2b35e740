//! Full pipeline on a small synthetic dataset, all in memory: generate logs,
//! train the segmenter, cut patches, then cross-validate the embedder and the
//! two traditional baselines.
//!
//! ```text
//! cargo run --release --example end_to_end -- --logs 16 --embed-epochs 100
//! ```

use std::time::Instant;

use clap::Parser;
use logend::config::{BaselineSettings, EmbeddingSettings};
use logend::embedding::{EmbedderConfig, OptimizerKind, TrainSchedule};
use logend::evaluation::{cross_validate, make_folds, render_table};
use logend::methods::{EmbedderMethod, GridMethod, IrisMethod};
use logend::pipeline::segment_samples;
use logend::segmentation::{train_segmenter, SegmenterConfig};
use logend::synthgen::{synthesize, DatasetProfile};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 16)]
    logs: usize,
    #[arg(long, default_value_t = 6)]
    acquisitions: usize,
    #[arg(long, default_value_t = 30)]
    seg_epochs: usize,
    #[arg(long, default_value_t = 48)]
    seg_side: u32,
    #[arg(long, default_value_t = 200)]
    embed_epochs: usize,
    #[arg(long, default_value_t = 64)]
    input_side: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> logend::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let t0 = Instant::now();

    let profile = DatasetProfile::desk("DESK", args.logs, args.acquisitions);
    let samples = synthesize(&profile, args.seed)?;
    println!(
        "{} acquisitions synthesized in {:.1?}",
        samples.len(),
        t0.elapsed()
    );

    let pairs: Vec<_> = samples.iter().map(|s| (&s.image, &s.truth.mask)).collect();
    let segmenter = train_segmenter(
        &pairs,
        SegmenterConfig {
            input_side: args.seg_side,
            epochs: args.seg_epochs,
            seed: args.seed,
            ..SegmenterConfig::default()
        },
    )?;
    let run = segment_samples(&samples, Some(&segmenter), 0.5, 5)?;
    println!(
        "segmentation: accuracy {:.4}, {} failures ({:.1?})",
        run.mean_accuracy().unwrap_or(f64::NAN),
        run.failures(),
        t0.elapsed()
    );

    let logs: Vec<String> = run.segmented.iter().map(|s| s.id.log_id.clone()).collect();
    let folds = make_folds(&logs, 4, args.seed)?;
    let mut reports = Vec::new();

    let settings = EmbeddingSettings {
        model: EmbedderConfig {
            input_side: args.input_side,
            ..EmbedderConfig::default()
        },
        schedule: TrainSchedule {
            optimizer: OptimizerKind::Adam,
            ..TrainSchedule::default()
        }
        .compressed(args.embed_epochs),
    };
    let mut embedder = EmbedderMethod::new(settings, args.seed);
    let eval = cross_validate("DESK", &run.segmented, &folds, &mut embedder, None)?;
    println!("embedder done ({:.1?})", t0.elapsed());
    for f in &eval.report.folds {
        println!(
            "  fold {}: EER {:.4}, genuine {:.3} vs impostor {:.3}",
            f.fold, f.eer, f.mean_genuine_distance, f.mean_impostor_distance
        );
    }
    reports.push(eval.report);

    let baselines = BaselineSettings::default();
    reports.push(
        cross_validate(
            "DESK",
            &run.segmented,
            &folds,
            &mut IrisMethod::new(&baselines),
            None,
        )?
        .report,
    );
    reports.push(
        cross_validate(
            "DESK",
            &run.segmented,
            &folds,
            &mut GridMethod::new(&baselines),
            None,
        )?
        .report,
    );

    print!("{}", render_table(&reports));
    println!("total {:.1?}", t0.elapsed());
    Ok(())
}
