//! `sweep`: sample + evaluate over a list of light guidance scales on the
//! held-out evaluation set, emitting a JSON report and an aligned table.

use crate::commands::evaluate::evaluate_frames;
use crate::commands::sample::render_trajectory_canvases;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::evalset::{held_out_pairs, EvalPair};
use candle_core::Device;
use lumiforge_core::image::Image;
use lumiforge_core::render::{render_video, DEFAULT_LIGHT_INTENSITY};
use lumiforge_core::text::fnv1a;
use lumiforge_model::codec::Codec;
use lumiforge_model::dit::DiT;
use lumiforge_model::light_encoder::LightModule;
use lumiforge_model::sampler::sample;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Mean metrics over the evaluation set at one guidance scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub light_scale: f64,
    pub consistency_embed: f64,
    pub consistency_perceptual: f64,
    pub direction_rmse: f64,
    pub brightness_consistency: f64,
    pub text_similarity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub eval_pairs: usize,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

struct PreparedPair {
    caption: String,
    canvases: Vec<Image>,
    reference_frames: Vec<Image>,
    seed: u64,
}

fn prepare_pair(
    pair: &EvalPair,
    n_frames: usize,
    resolution: usize,
    base_seed: u64,
) -> Result<PreparedPair, CliError> {
    let canvases = render_trajectory_canvases(
        &pair.trajectory,
        n_frames,
        resolution,
        DEFAULT_LIGHT_INTENSITY,
    )?;
    let trajectory = pair.trajectory.resample(n_frames)?;
    let reference = render_video(&pair.scene, &trajectory, 8.0, DEFAULT_LIGHT_INTENSITY)?;
    Ok(PreparedPair {
        caption: pair.caption.clone(),
        canvases,
        reference_frames: reference.frames,
        seed: base_seed ^ fnv1a(pair.caption.as_bytes()),
    })
}

/// Runs the full sweep with already-loaded models; shared by the CLI and
/// the acceptance tests.
pub fn sweep_scales(
    config: &RunConfig,
    codec: &Codec,
    backbone: &DiT,
    light: &LightModule,
    scales: &[f64],
    eval_pairs: usize,
) -> Result<SweepReport, CliError> {
    if scales.is_empty() {
        return Err(CliError::Run {
            kind: "sweep".into(),
            detail: "sweep.light_scales must be non-empty".into(),
        });
    }
    let grid = config.dataset.grid.build()?;
    let sample_config = &config.sample;
    let pairs = held_out_pairs(
        &grid,
        eval_pairs,
        sample_config.n_frames,
        sample_config.resolution,
        config.sweep.seed,
    )?;
    let prepared: Vec<PreparedPair> = pairs
        .iter()
        .map(|p| {
            prepare_pair(
                p,
                sample_config.n_frames,
                sample_config.resolution,
                sample_config.seed,
            )
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let mut sums = [0f64; 5];
        for pair in &prepared {
            let mut point_config = sample_config.clone();
            point_config.light_scale = scale;
            point_config.seed = pair.seed;
            let frames = sample(
                backbone,
                codec,
                Some(light),
                &pair.caption,
                &pair.canvases,
                &point_config,
            )?;
            let report =
                evaluate_frames(&frames, &pair.canvases, &pair.reference_frames, &pair.caption)?;
            sums[0] += report.consistency_embed as f64;
            sums[1] += report.consistency_perceptual as f64;
            sums[2] += report.direction_rmse as f64;
            sums[3] += report.brightness_consistency as f64;
            sums[4] += report.text_similarity as f64;
        }
        let n = prepared.len() as f64;
        rows.push(SweepRow {
            light_scale: scale,
            consistency_embed: sums[0] / n,
            consistency_perceptual: sums[1] / n,
            direction_rmse: sums[2] / n,
            brightness_consistency: sums[3] / n,
            text_similarity: sums[4] / n,
        });
    }
    Ok(SweepReport {
        eval_pairs,
        seed: config.sweep.seed,
        rows,
    })
}

/// Aligned-text table, one row per scale.
pub fn format_table(report: &SweepReport) -> String {
    let headers = [
        "light_scale",
        "consistency_embed",
        "consistency_perceptual",
        "direction_rmse",
        "brightness_consistency",
        "text_similarity",
    ];
    let mut out = String::new();
    for (i, h) in headers.iter().enumerate() {
        if i > 0 {
            out.push_str("  ");
        }
        out.push_str(&format!("{h:>w$}", w = h.len().max(10)));
    }
    out.push('\n');
    for row in &report.rows {
        let values = [
            row.light_scale,
            row.consistency_embed,
            row.consistency_perceptual,
            row.direction_rmse,
            row.brightness_consistency,
            row.text_similarity,
        ];
        for (i, (h, v)) in headers.iter().zip(values).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{v:>w$.4}", w = h.len().max(10)));
        }
        out.push('\n');
    }
    out
}

/// CLI entry: loads checkpoints, sweeps, writes `sweep.json` and
/// `sweep.txt` into `out_dir`, and returns the report.
pub fn run_sweep(
    config: &RunConfig,
    codec_path: &Path,
    backbone_path: &Path,
    light_path: &Path,
    out_dir: &Path,
) -> Result<SweepReport, CliError> {
    let codec = Codec::load(codec_path, false, &Device::Cpu)?;
    let backbone = DiT::load(backbone_path, false, &Device::Cpu)?;
    let light = LightModule::load(light_path, false, &Device::Cpu)?;
    let report = sweep_scales(
        config,
        &codec,
        &backbone,
        &light,
        &config.sweep.light_scales,
        config.sweep.eval_pairs,
    )?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("sweep.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    std::fs::write(out_dir.join("sweep.txt"), format_table(&report))?;
    Ok(report)
}
