//! Run configuration: one JSON document drives every subcommand.
//!
//! The schema is strict — unknown keys anywhere in the document are a
//! config error (exit code 2) naming the offending key path. Sections may
//! be omitted entirely (defaults apply). Sections native to this crate
//! (`dataset`, `codec.training`, `sweep`, `dataset.grid`) accept partial
//! content; sections that mirror model-crate configs (`codec.model`,
//! `backbone.*`, `train`, `sample`) must be complete if present.
//!
//! Seed precedence, highest first: the `LUMIFORGE_SEED` environment
//! variable, the top-level `seed` field, then each section's own seed.
//! When an override is active, every stage derives its seed from the
//! override XOR a per-stage tag so stages still draw distinct streams.

use lumiforge_core::grid::{
    arc_trajectory, linear_trajectory, ArcPlane, GridIndex, LightGrid, Trajectory,
};
use lumiforge_core::text::fnv1a;
use lumiforge_model::codec::CodecConfig;
use lumiforge_model::dit::DiTConfig;
use lumiforge_model::sampler::SampleConfig;
use lumiforge_model::trainer::{BackboneTrainConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::CliError;

pub const SEED_ENV: &str = "LUMIFORGE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides every section's seed when set (see module docs).
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub codec: CodecSection,
    #[serde(default)]
    pub backbone: BackboneSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            dataset: DatasetSection::default(),
            codec: CodecSection::default(),
            backbone: BackboneSection::default(),
            train: TrainConfig::default(),
            sample: SampleConfig::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub extent_cm: f64,
    pub spacing_cm: f64,
    pub origin_cm: [f64; 3],
}

impl Default for GridSpec {
    fn default() -> Self {
        let g = LightGrid::default_portrait();
        GridSpec {
            extent_cm: g.extent_cm(),
            spacing_cm: g.spacing_cm(),
            origin_cm: g.origin_cm(),
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<LightGrid, lumiforge_core::Error> {
        LightGrid::build(self.extent_cm, self.spacing_cm, self.origin_cm)
    }
}

/// Declarative trajectory; `generate-dataset` materializes each spec as a
/// JSON trajectory file before building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// Straight lattice walk between two grid indices.
    Linear { start: [usize; 3], end: [usize; 3] },
    /// Circular arc around a grid index, snapped to the lattice.
    Arc {
        center: [usize; 3],
        radius_cm: f64,
        plane: ArcPlane,
        angle_start: f64,
        angle_end: f64,
    },
    /// Pre-existing trajectory file, used verbatim.
    File { path: String },
}

impl TrajectorySpec {
    pub fn materialize(
        &self,
        grid: &LightGrid,
        n_frames: usize,
    ) -> Result<Trajectory, lumiforge_core::Error> {
        let idx = |v: [usize; 3]| GridIndex::new(v[0], v[1], v[2]);
        match self {
            TrajectorySpec::Linear { start, end } => {
                linear_trajectory(grid, idx(*start), idx(*end), n_frames)
                    .map(Trajectory::Single)
            }
            TrajectorySpec::Arc {
                center,
                radius_cm,
                plane,
                angle_start,
                angle_end,
            } => arc_trajectory(
                grid,
                idx(*center),
                *radius_cm,
                *plane,
                *angle_start,
                *angle_end,
                n_frames,
            )
            .map(Trajectory::Single),
            TrajectorySpec::File { path } => Trajectory::load(Path::new(path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub subjects: Vec<u64>,
    pub trajectories: Vec<TrajectorySpec>,
    pub frames_per_video: usize,
    pub resolution: usize,
    pub caption_variants: usize,
    pub seed: u64,
    pub grid: GridSpec,
}

impl Default for DatasetSection {
    fn default() -> Self {
        // toy-scale default: 2 subjects x 4 trajectories x 16 frames @ 64x64.
        // lights sit at j > 16 so they stay in front of the canvas plane
        // (the plane passes through the head center at world j = 0).
        // all four paths avoid the camera axis through the head center,
        // where the lighting-direction estimate degenerates to frontal
        DatasetSection {
            subjects: vec![0, 1],
            trajectories: vec![
                TrajectorySpec::Linear {
                    start: [4, 28, 22],
                    end: [28, 28, 22],
                },
                TrajectorySpec::Linear {
                    start: [4, 28, 8],
                    end: [28, 28, 12],
                },
                TrajectorySpec::Arc {
                    center: [16, 28, 16],
                    radius_cm: 40.0,
                    plane: ArcPlane::Ik,
                    angle_start: 0.0,
                    angle_end: std::f64::consts::PI,
                },
                TrajectorySpec::Linear {
                    start: [24, 28, 4],
                    end: [24, 28, 28],
                },
            ],
            frames_per_video: 16,
            resolution: 64,
            caption_variants: 4,
            seed: 0,
            grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecTrainSection {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for CodecTrainSection {
    fn default() -> Self {
        CodecTrainSection {
            steps: 300,
            batch: 8,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CodecSection {
    #[serde(default)]
    pub model: CodecConfig,
    #[serde(default)]
    pub training: CodecTrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BackboneSection {
    #[serde(default)]
    pub model: DiTConfig,
    #[serde(default)]
    pub training: BackboneTrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub light_scales: Vec<f64>,
    /// Held-out (trajectory, caption) pairs evaluated per sweep point.
    pub eval_pairs: usize,
    pub seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            light_scales: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            eval_pairs: 20,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parses, applies seed overrides, and validates. Any schema violation
    /// is a [`CliError::Config`] naming the key path.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            detail: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut config: RunConfig =
            serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
                detail: format!("invalid config key `{}`: {}", e.path(), e.inner()),
            })?;
        config.apply_env_seed()?;
        config.apply_seed_override();
        config.validate()?;
        Ok(config)
    }

    fn apply_env_seed(&mut self) -> Result<(), CliError> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            let seed: u64 = raw.parse().map_err(|_| CliError::Config {
                detail: format!("invalid config key `{SEED_ENV}`: `{raw}` is not a u64"),
            })?;
            self.seed = Some(seed);
        }
        Ok(())
    }

    fn apply_seed_override(&mut self) {
        if let Some(seed) = self.seed {
            let derive = |tag: &str| seed ^ fnv1a(tag.as_bytes());
            self.dataset.seed = derive("dataset");
            self.codec.training.seed = derive("codec");
            self.backbone.training.seed = derive("backbone");
            self.train.seed = derive("train");
            self.sample.seed = derive("sample");
            self.sweep.seed = derive("sweep");
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |detail: String| CliError::Config { detail };
        if self.dataset.subjects.is_empty() {
            return Err(bad("dataset.subjects must be non-empty".into()));
        }
        if self.dataset.trajectories.is_empty() {
            return Err(bad("dataset.trajectories must be non-empty".into()));
        }
        if self.dataset.frames_per_video == 0 || self.dataset.resolution == 0 {
            return Err(bad(
                "dataset.frames_per_video and dataset.resolution must be >= 1".into(),
            ));
        }
        self.dataset
            .grid
            .build()
            .map_err(|e| bad(format!("dataset.grid: {e}")))?;
        if self.codec.training.steps == 0 || self.codec.training.batch == 0 {
            return Err(bad("codec.training.steps and batch must be >= 1".into()));
        }
        self.train
            .validate()
            .map_err(|e| bad(format!("train: {e}")))?;
        self.sample
            .validate(self.backbone.model.schedule.t_train)
            .map_err(|e| bad(format!("sample: {e}")))?;
        if self.sweep.light_scales.is_empty() {
            return Err(bad("sweep.light_scales must be non-empty".into()));
        }
        if self.sweep.eval_pairs == 0 {
            return Err(bad("sweep.eval_pairs must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let config = RunConfig::default();
        let text = serde_json::to_string(&config).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back.dataset.subjects, vec![0, 1]);
        assert_eq!(back.sweep.light_scales.len(), 5);
    }

    #[test]
    fn unknown_key_names_the_path() {
        let err = RunConfig::from_json(r#"{"dataset": {"subjects": [0], "bogus": 1}}"#)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dataset.bogus") || msg.contains("dataset"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn top_level_seed_overrides_sections() {
        let a = RunConfig::from_json(r#"{"seed": 7}"#).unwrap();
        let b = RunConfig::from_json(r#"{"seed": 8}"#).unwrap();
        assert_ne!(a.train.seed, b.train.seed);
        assert_ne!(a.train.seed, a.sample.seed);
    }

    #[test]
    fn empty_document_is_the_default_config() {
        let config = RunConfig::from_json("{}").unwrap();
        assert_eq!(config.train.beta, 3.0);
        assert_eq!(config.sample.t_infer, 50);
    }

    #[test]
    fn trajectory_specs_materialize() {
        let grid = LightGrid::default_portrait();
        for spec in DatasetSection::default().trajectories {
            let traj = spec.materialize(&grid, 16).unwrap();
            assert_eq!(traj.len(), 16);
        }
    }
}
