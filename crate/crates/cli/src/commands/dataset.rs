//! `generate-dataset`: materialize trajectory specs and build the captioned
//! dataset under one output directory.

use crate::config::RunConfig;
use crate::error::CliError;
use lumiforge_core::dataset::{build_dataset, BuildConfig};
use std::path::{Path, PathBuf};

/// Writes `out_dir/trajectories/traj_NN.json` for each spec, renders every
/// `(subject, trajectory)` pair, and returns the manifest path.
pub fn generate_dataset(config: &RunConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    let section = &config.dataset;
    let grid = section.grid.build()?;

    let traj_dir = out_dir.join("trajectories");
    std::fs::create_dir_all(&traj_dir)?;
    let mut traj_paths = Vec::with_capacity(section.trajectories.len());
    for (i, spec) in section.trajectories.iter().enumerate() {
        let traj = spec.materialize(&grid, section.frames_per_video)?;
        if *traj.grid() != grid {
            return Err(CliError::Run {
                kind: "dataset".into(),
                detail: format!("trajectory {i} uses a different grid than dataset.grid"),
            });
        }
        let path = traj_dir.join(format!("traj_{i:02}.json"));
        traj.save(&path)?;
        traj_paths.push(path);
    }

    let mut build = BuildConfig::new(
        section.subjects.clone(),
        traj_paths,
        section.frames_per_video,
        section.resolution,
        out_dir.to_path_buf(),
        section.seed,
    );
    build.caption_variants = section.caption_variants;
    build_dataset(&build)?;
    Ok(out_dir.join("manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DatasetSection, TrajectorySpec};
    use lumiforge_core::dataset::DatasetManifest;

    fn tiny_config() -> RunConfig {
        let mut config = RunConfig::default();
        config.dataset = DatasetSection {
            subjects: vec![0],
            trajectories: vec![TrajectorySpec::Linear {
                start: [4, 28, 16],
                end: [28, 28, 16],
            }],
            frames_per_video: 4,
            resolution: 16,
            ..DatasetSection::default()
        };
        config
    }

    #[test]
    fn builds_a_loadable_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = generate_dataset(&tiny_config(), dir.path()).unwrap();
        let (manifest, _) = DatasetManifest::load(&manifest_path).unwrap();
        assert_eq!(manifest.samples.len(), 1);
        assert_eq!(manifest.samples[0].n_frames, 4);
        assert!(dir.path().join("trajectories/traj_00.json").exists());
    }
}
