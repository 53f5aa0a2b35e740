//! The command layer driven from code: the same steps as
//! `logend synth`, `segment`, `baseline-extract`, `evaluate` and `report`,
//! writing run directories under a temporary root.

use logend::commands::{
    baseline_extract, evaluate, report, segment, synth, BaselineArgs, EvaluateArgs, MethodKind,
    ReportArgs, SegmentArgs, SynthArgs,
};
use logend::config::ExperimentConfig;

fn main() -> logend::Result<()> {
    let root = std::env::temp_dir().join("logend-cli");
    let config = ExperimentConfig::default();

    synth(
        &config,
        &SynthArgs {
            out: root.join("data"),
            profile: "desk".into(),
            tag: Some("CLI".into()),
            n_logs: Some(8),
            acquisitions_per_end: Some(2),
            image_size: None,
        },
    )?;
    segment(
        &config,
        &SegmentArgs {
            data: root.join("data"),
            tag: "CLI".into(),
            out: root.join("patches"),
            model: None,
            train_tag: None,
            threshold: None,
            ground_truth: true,
        },
    )?;
    let piths = baseline_extract(
        &config,
        &BaselineArgs {
            method: MethodKind::Iris,
            patches: root.join("patches"),
            out: root.join("iris-templates"),
        },
    )?;
    println!("{} iris templates", piths.len());

    for method in [MethodKind::Iris, MethodKind::CircularGrid] {
        evaluate(
            &config,
            &EvaluateArgs {
                method,
                patches: root.join("patches"),
                out: root.join("eval").join(method.as_str()),
                regime: None,
                extra: Vec::new(),
            },
        )?;
    }
    print!(
        "{}",
        report(&ReportArgs {
            inputs: vec![root.join("eval")],
            out: root.join("table.txt"),
        })?
    );
    Ok(())
}
