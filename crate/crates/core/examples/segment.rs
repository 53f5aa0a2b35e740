//! Train the per-pixel segmenter on synthetic ground truth, segment held-out
//! logs and cut square patches.

use logend::pipeline::segment_samples;
use logend::segmentation::{train_segmenter, SegmenterConfig, DEFAULT_BORDER};
use logend::synthgen::{synthesize, DatasetProfile};

fn main() -> logend::Result<()> {
    let train = synthesize(&DatasetProfile::desk("TRAIN", 8, 3), 1)?;
    let test = synthesize(&DatasetProfile::desk("TEST", 8, 2), 2)?;

    let pairs: Vec<_> = train.iter().map(|s| (&s.image, &s.truth.mask)).collect();
    let model = train_segmenter(
        &pairs,
        SegmenterConfig {
            epochs: 15,
            ..SegmenterConfig::default()
        },
    )?;

    let run = segment_samples(&test, Some(&model), 0.5, DEFAULT_BORDER)?;
    println!(
        "pixel accuracy {:.4} over {} images, {} failures",
        run.mean_accuracy().unwrap_or(f64::NAN),
        test.len(),
        run.failures()
    );
    let out = std::env::temp_dir().join("logend-segment");
    std::fs::create_dir_all(&out).ok();
    for seg in run.segmented.iter().take(3) {
        let path = out.join(format!("{}.png", seg.id.stem()));
        seg.patch.pixels.save(&path)?;
        println!(
            "{} -> {} ({} px square)",
            seg.id,
            path.display(),
            seg.patch.side()
        );
    }
    Ok(())
}
