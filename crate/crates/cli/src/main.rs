//! `lumiforge`: dataset synthesis, training, sampling, evaluation and
//! guidance-scale sweeps for the portrait-relighting pipeline.
//!
//! Errors print a structured JSON object to stderr; config/schema problems
//! exit with code 2, everything else with 1.

use clap::{Parser, Subcommand};
use lumiforge_cli::commands::{dataset, evaluate, sample, sweep, train};
use lumiforge_cli::{CliError, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lumiforge", version, about = "Portrait-relighting pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the captioned dataset described by the config.
    GenerateDataset {
        /// Run config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset output directory (will contain manifest.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the latent codec on a dataset.
    TrainCodec {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Path to the dataset manifest.json.
        #[arg(long)]
        dataset: PathBuf,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Denoising warmup of the video backbone (codec frozen).
    TrainBackbone {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        /// Trained codec checkpoint.
        #[arg(long)]
        codec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV of per-step losses.
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// Dual-branch light-module training (codec and backbone frozen).
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        codec: PathBuf,
        /// Trained backbone checkpoint.
        #[arg(long)]
        backbone: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        losses: Option<PathBuf>,
        /// Ablation: drop the disentanglement loss.
        #[arg(long)]
        no_dis_loss: bool,
        /// Ablation: train on base captions only.
        #[arg(long)]
        no_caption_aug: bool,
    },
    /// Generate one video from a caption and a light trajectory.
    Sample {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        codec: PathBuf,
        #[arg(long)]
        backbone: PathBuf,
        /// Light-module checkpoint; omit to sample the bare backbone.
        #[arg(long)]
        light: Option<PathBuf>,
        #[arg(long)]
        caption: String,
        /// Trajectory JSON driving the lighting canvases.
        #[arg(long)]
        trajectory: PathBuf,
        /// Light guidance scale override.
        #[arg(long)]
        light_scale: Option<f64>,
        /// DDIM step count override.
        #[arg(long)]
        steps: Option<usize>,
        /// Classifier-free guidance weight override.
        #[arg(long)]
        w: Option<f64>,
        /// Sampling seed override (takes precedence over LUMIFORGE_SEED).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for frame_NNNNN.png files.
        #[arg(long)]
        out: PathBuf,
        /// Also write a horizontal contact sheet (strip.png).
        #[arg(long)]
        strip: bool,
    },
    /// Score a generated video against a reference sample directory.
    Evaluate {
        /// Directory of generated frame_*.png files.
        #[arg(long)]
        video: PathBuf,
        /// Dataset sample directory (frame_*.png + canvas_*.png).
        #[arg(long)]
        reference: PathBuf,
        /// Caption override; defaults to the reference metadata.json.
        #[arg(long)]
        caption: Option<String>,
        /// Report JSON output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-frame CSV output path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sample + evaluate over sweep.light_scales on held-out pairs.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        codec: PathBuf,
        #[arg(long)]
        backbone: PathBuf,
        #[arg(long)]
        light: PathBuf,
        /// Output directory for sweep.json and sweep.txt.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => RunConfig::from_json("{}"),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenerateDataset { config, out } => {
            let config = load_config(config.as_deref())?;
            let manifest = dataset::generate_dataset(&config, &out)?;
            println!(
                "{}",
                serde_json::json!({ "manifest": manifest.display().to_string() })
            );
        }
        Command::TrainCodec {
            config,
            dataset,
            out,
        } => {
            let config = load_config(config.as_deref())?;
            let summary = train::run_train_codec(&config, &dataset, &out)?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::TrainBackbone {
            config,
            dataset,
            codec,
            out,
            losses,
        } => {
            let config = load_config(config.as_deref())?;
            let summary =
                train::run_train_backbone(&config, &dataset, &codec, &out, losses.as_deref())?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Train {
            config,
            dataset,
            codec,
            backbone,
            out,
            losses,
            no_dis_loss,
            no_caption_aug,
        } => {
            let config = load_config(config.as_deref())?;
            let summary = train::run_train_light(
                &config,
                &dataset,
                &codec,
                &backbone,
                &out,
                losses.as_deref(),
                no_dis_loss,
                no_caption_aug,
            )?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Sample {
            config,
            codec,
            backbone,
            light,
            caption,
            trajectory,
            light_scale,
            steps,
            w,
            seed,
            out,
            strip,
        } => {
            let config = load_config(config.as_deref())?;
            let overrides = sample::SampleOverrides {
                light_scale,
                steps,
                w,
                seed,
            };
            let output = sample::run_sample(
                &config,
                &codec,
                &backbone,
                light.as_deref(),
                &caption,
                &trajectory,
                &overrides,
                &out,
                strip,
            )?;
            println!(
                "{}",
                serde_json::json!({
                    "out_dir": out.display().to_string(),
                    "frames": output.frame_paths.len(),
                    "strip": output.strip_path.map(|p| p.display().to_string()),
                })
            );
        }
        Command::Evaluate {
            video,
            reference,
            caption,
            out,
            csv,
        } => {
            let report = evaluate::run_evaluate(
                &video,
                &reference,
                caption.as_deref(),
                &out,
                csv.as_deref(),
            )?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Sweep {
            config,
            codec,
            backbone,
            light,
            out,
        } => {
            let config = load_config(config.as_deref())?;
            let report = sweep::run_sweep(&config, &codec, &backbone, &light, &out)?;
            print!("{}", sweep::format_table(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
