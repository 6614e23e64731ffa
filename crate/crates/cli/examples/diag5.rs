//! Scratch: evaluate direction-metric floors for candidate fixture
//! trajectory sets (built into /tmp/diagtraj).

use lumiforge_cli::commands::dataset;
use lumiforge_cli::config::{RunConfig, TrajectorySpec};
use lumiforge_core::dataset::{load_sample, DatasetManifest};
use lumiforge_core::metrics::direction_rmse;
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from("/tmp/diagtraj");
    let _ = std::fs::remove_dir_all(&out);
    let mut config = RunConfig::default();
    config.dataset.trajectories = vec![
        // horizontal sweep above center
        TrajectorySpec::Linear { start: [4, 28, 22], end: [28, 28, 22] },
        // shallow diagonal below center
        TrajectorySpec::Linear { start: [4, 28, 8], end: [28, 28, 12] },
        // half arc in the ik plane, radius 40 cm
        TrajectorySpec::Arc {
            center: [16, 28, 16],
            radius_cm: 40.0,
            plane: lumiforge_core::grid::ArcPlane::Ik,
            angle_start: 0.0,
            angle_end: std::f64::consts::PI,
        },
        // vertical sweep right of center
        TrajectorySpec::Linear { start: [24, 28, 4], end: [24, 28, 28] },
    ];
    let manifest_path = dataset::generate_dataset(&config, &out)?;
    let (manifest, root) = DatasetManifest::load(&manifest_path)?;
    let ids = ["s000_t00", "s000_t01", "s000_t02", "s000_t03"];
    let mut samples = Vec::new();
    for id in ids {
        let s = load_sample(&manifest, &root, id)?;
        let floor = direction_rmse(&s.frames, &s.canvases)?;
        eprintln!("[floor] {id}: {floor:.4}");
        samples.push(s);
    }
    for i in 0..ids.len() {
        for j in 0..ids.len() {
            if i == j {
                continue;
            }
            let cross = direction_rmse(&samples[i].frames, &samples[j].canvases)?;
            eprintln!("[cross] frames {} vs canvases {}: {cross:.4}", ids[i], ids[j]);
        }
    }
    Ok(())
}
