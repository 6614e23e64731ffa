//! `train-codec`, `train-backbone`, `train`: the three training stages,
//! each reading a dataset manifest and writing one checkpoint.

use crate::config::RunConfig;
use crate::error::CliError;
use candle_core::Device;
use lumiforge_core::dataset::DatasetManifest;
use lumiforge_model::codec::{collect_codec_images, train_codec, Codec};
use lumiforge_model::dit::DiT;
use lumiforge_model::light_encoder::{LightEncoderConfig, LightModule};
use lumiforge_model::trainer::{train, train_backbone, TrainReport};
use std::path::Path;

/// Final-loss summary printed by each stage.
#[derive(Debug, serde::Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub steps: usize,
    pub final_loss: f64,
    pub checkpoint: String,
}

fn summarize(stage: &str, losses: &[f64], out: &Path) -> StageSummary {
    StageSummary {
        stage: stage.to_string(),
        steps: losses.len(),
        final_loss: losses.last().copied().unwrap_or(f64::NAN),
        checkpoint: out.display().to_string(),
    }
}

fn report_losses(report: &TrainReport) -> Vec<f64> {
    report.rows.iter().map(|r| r.total).collect()
}

pub fn run_train_codec(
    config: &RunConfig,
    manifest_path: &Path,
    out: &Path,
) -> Result<StageSummary, CliError> {
    let (manifest, root) = DatasetManifest::load(manifest_path)?;
    let images = collect_codec_images(&manifest, &root)?;
    let section = &config.codec;
    let mut codec = Codec::new(
        section.model.clone(),
        section.training.seed,
        true,
        &Device::Cpu,
    )?;
    let report = train_codec(
        &mut codec,
        &images,
        section.training.steps,
        section.training.batch,
        section.training.lr,
        section.training.seed,
    )?;
    codec.save(out)?;
    Ok(summarize("train-codec", &report.losses, out))
}

pub fn run_train_backbone(
    config: &RunConfig,
    manifest_path: &Path,
    codec_path: &Path,
    out: &Path,
    losses_csv: Option<&Path>,
) -> Result<StageSummary, CliError> {
    let (manifest, root) = DatasetManifest::load(manifest_path)?;
    let codec = Codec::load(codec_path, false, &Device::Cpu)?;
    let mut backbone = DiT::new(
        config.backbone.model.clone(),
        config.backbone.training.seed,
        true,
        &Device::Cpu,
    )?;
    let report = train_backbone(&codec, &mut backbone, &manifest, &root, &config.backbone.training)?;
    backbone.save(out)?;
    if let Some(path) = losses_csv {
        report.save_csv(path)?;
    }
    Ok(summarize("train-backbone", &report_losses(&report), out))
}

/// Dual-branch light-module training; `no_dis_loss` / `no_caption_aug`
/// reproduce the ablation configurations.
#[allow(clippy::too_many_arguments)]
pub fn run_train_light(
    config: &RunConfig,
    manifest_path: &Path,
    codec_path: &Path,
    backbone_path: &Path,
    out: &Path,
    losses_csv: Option<&Path>,
    no_dis_loss: bool,
    no_caption_aug: bool,
) -> Result<StageSummary, CliError> {
    let (manifest, root) = DatasetManifest::load(manifest_path)?;
    let codec = Codec::load(codec_path, false, &Device::Cpu)?;
    let backbone = DiT::load(backbone_path, false, &Device::Cpu)?;
    let light_config = LightEncoderConfig::matching(backbone.config());
    let mut light = LightModule::new(light_config, config.train.seed, true, &Device::Cpu)?;
    let mut train_config = config.train.clone();
    if no_dis_loss {
        train_config.enable_dis_loss = false;
    }
    if no_caption_aug {
        train_config.enable_caption_aug = false;
    }
    let report = train(&codec, &backbone, &mut light, &manifest, &root, &train_config)?;
    light.save(out)?;
    if let Some(path) = losses_csv {
        report.save_csv(path)?;
    }
    Ok(summarize("train", &report_losses(&report), out))
}
