use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use logend::commands::{self, MethodKind};
use logend::config::ExperimentConfig;
use logend::evaluation::Regime;
use logend::Result;

#[derive(Parser)]
#[command(name = "logend", version, about = "Wood log end recognition toolkit")]
struct Cli {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Preset name or `desk`.
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long)]
        tag: Option<String>,
        #[arg(long)]
        logs: Option<usize>,
        #[arg(long)]
        acquisitions: Option<usize>,
        #[arg(long)]
        image_size: Option<u32>,
    },
    /// Segment a dataset and cut square patches.
    Segment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        tag: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        train_tag: Option<String>,
        #[arg(long)]
        threshold: Option<f32>,
        #[arg(long)]
        ground_truth: bool,
    },
    /// Train an embedder on a patch directory.
    TrainEmbed {
        #[arg(long)]
        patches: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        extra: Vec<String>,
    },
    /// Embed every patch with a trained model.
    Embed {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        patches: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract iris or circular-grid templates.
    BaselineExtract(MethodArgs),
    /// Cross-validated verification EER.
    Evaluate {
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long)]
        regime: Option<Regime>,
        #[arg(long)]
        extra: Vec<String>,
    },
    /// Tabulate evaluation reports.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long)]
    method: MethodKind,
    #[arg(long)]
    patches: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Synth {
            out,
            profile,
            tag,
            logs,
            acquisitions,
            image_size,
        } => {
            let manifest = commands::synth(
                &config,
                &commands::SynthArgs {
                    out,
                    profile,
                    tag,
                    n_logs: logs,
                    acquisitions_per_end: acquisitions,
                    image_size,
                },
            )?;
            println!("{}", manifest.display());
        }
        Command::Segment {
            data,
            tag,
            out,
            model,
            train_tag,
            threshold,
            ground_truth,
        } => {
            let index = commands::segment(
                &config,
                &commands::SegmentArgs {
                    data,
                    tag,
                    out,
                    model,
                    train_tag,
                    threshold,
                    ground_truth,
                },
            )?;
            println!("{} patches", index.entries.len());
        }
        Command::TrainEmbed {
            patches,
            out,
            extra,
        } => {
            let path = commands::train_embed(
                &config,
                &commands::TrainEmbedArgs {
                    patches,
                    out,
                    extra,
                },
            )?;
            println!("{}", path.display());
        }
        Command::Embed {
            model,
            patches,
            out,
        } => {
            let table = commands::embed(
                &config,
                &commands::EmbedArgs {
                    model,
                    patches,
                    out,
                },
            )?;
            println!("{} embeddings", table.rows.len());
        }
        Command::BaselineExtract(MethodArgs {
            method,
            patches,
            out,
        }) => {
            let records = commands::baseline_extract(
                &config,
                &commands::BaselineArgs {
                    method,
                    patches,
                    out,
                },
            )?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            println!("{} templates, {failed} failures", records.len() - failed);
        }
        Command::Evaluate {
            method:
                MethodArgs {
                    method,
                    patches,
                    out,
                },
            regime,
            extra,
        } => {
            let report = commands::evaluate(
                &config,
                &commands::EvaluateArgs {
                    method,
                    patches,
                    out,
                    regime,
                    extra,
                },
            )?;
            println!("mean EER {:.2}%", 100.0 * report.mean_eer);
        }
        Command::Report { inputs, out } => {
            print!(
                "{}",
                commands::report(&commands::ReportArgs { inputs, out })?
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
