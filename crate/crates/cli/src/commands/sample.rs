//! `sample`: generate one video from caption + light trajectory.

use crate::config::RunConfig;
use crate::error::CliError;
use candle_core::Device;
use lumiforge_core::canvas::{render_canvas_sequence, CanvasGeometry};
use lumiforge_core::grid::Trajectory;
use lumiforge_core::image::Image;
use lumiforge_core::render::{build_subject_with_resolution, DEFAULT_LIGHT_INTENSITY};
use lumiforge_model::codec::Codec;
use lumiforge_model::dit::DiT;
use lumiforge_model::light_encoder::LightModule;
use lumiforge_model::sampler::{film_strip, sample, SampleConfig};
use std::path::{Path, PathBuf};

/// CLI-level overrides applied on top of the config's `sample` section.
#[derive(Debug, Default, Clone)]
pub struct SampleOverrides {
    pub light_scale: Option<f64>,
    pub steps: Option<usize>,
    pub w: Option<f64>,
    pub seed: Option<u64>,
}

impl SampleOverrides {
    pub fn apply(&self, base: &SampleConfig) -> SampleConfig {
        let mut out = base.clone();
        if let Some(v) = self.light_scale {
            out.light_scale = v;
        }
        if let Some(v) = self.steps {
            out.t_infer = v;
        }
        if let Some(v) = self.w {
            out.w = v;
        }
        if let Some(v) = self.seed {
            out.seed = v;
        }
        out
    }
}

/// Per-frame lighting canvases for a trajectory, matching the dataset's
/// canvas geometry (plane through the head center, subject-independent).
pub fn render_trajectory_canvases(
    trajectory: &Trajectory,
    n_frames: usize,
    resolution: usize,
    light_gain: f64,
) -> Result<Vec<Image>, CliError> {
    let trajectory = trajectory.resample(n_frames)?;
    let scene = build_subject_with_resolution(0, resolution);
    let geometry = CanvasGeometry::for_scene(&scene);
    let seq = render_canvas_sequence(&trajectory, &geometry, light_gain)?;
    Ok(seq.canvases.into_iter().map(|c| c.pixels).collect())
}

pub struct SampleOutput {
    pub frames: Vec<Image>,
    pub frame_paths: Vec<PathBuf>,
    pub strip_path: Option<PathBuf>,
}

/// Samples a video and writes `frame_NNNNN.png` files (plus an optional
/// contact-sheet `strip.png`) into `out_dir`.
#[allow(clippy::too_many_arguments)]
pub fn run_sample(
    config: &RunConfig,
    codec_path: &Path,
    backbone_path: &Path,
    light_path: Option<&Path>,
    caption: &str,
    trajectory_path: &Path,
    overrides: &SampleOverrides,
    out_dir: &Path,
    strip: bool,
) -> Result<SampleOutput, CliError> {
    let codec = Codec::load(codec_path, false, &Device::Cpu)?;
    let backbone = DiT::load(backbone_path, false, &Device::Cpu)?;
    let light = light_path
        .map(|p| LightModule::load(p, false, &Device::Cpu))
        .transpose()?;
    let sample_config = overrides.apply(&config.sample);

    let trajectory = Trajectory::load(trajectory_path)?;
    let canvases = if light.is_some() {
        render_trajectory_canvases(
            &trajectory,
            sample_config.n_frames,
            sample_config.resolution,
            DEFAULT_LIGHT_INTENSITY,
        )?
    } else {
        Vec::new()
    };

    let frames = sample(
        &backbone,
        &codec,
        light.as_ref(),
        caption,
        &canvases,
        &sample_config,
    )?;

    std::fs::create_dir_all(out_dir)?;
    let mut frame_paths = Vec::with_capacity(frames.len());
    for (t, frame) in frames.iter().enumerate() {
        let path = out_dir.join(format!("frame_{t:05}.png"));
        frame.save_png(&path)?;
        frame_paths.push(path);
    }
    let strip_path = if strip {
        let path = out_dir.join("strip.png");
        film_strip(&frames)?.save_png(&path)?;
        Some(path)
    } else {
        None
    };
    Ok(SampleOutput {
        frames,
        frame_paths,
        strip_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lumiforge_core::grid::{linear_trajectory, GridIndex, LightGrid};

    #[test]
    fn canvases_match_frame_count_and_resolution() {
        let grid = LightGrid::default_portrait();
        let track = linear_trajectory(
            &grid,
            GridIndex::new(4, 28, 16),
            GridIndex::new(28, 28, 16),
            4,
        )
        .unwrap();
        let canvases =
            render_trajectory_canvases(&Trajectory::Single(track), 8, 32, 6000.0).unwrap();
        assert_eq!(canvases.len(), 8);
        assert_eq!(canvases[0].width(), 32);
        assert_eq!(canvases[0].channels(), 1);
    }

    #[test]
    fn overrides_replace_only_given_fields() {
        let base = SampleConfig::default();
        let over = SampleOverrides {
            steps: Some(10),
            ..Default::default()
        };
        let merged = over.apply(&base);
        assert_eq!(merged.t_infer, 10);
        assert_eq!(merged.w, base.w);
    }
}
