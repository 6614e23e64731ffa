//! Dataset assembly: subjects x trajectories rendered to disk with captions
//! and a single JSON manifest.
//!
//! Frames are content-addressed per `(subject, lights)` so trajectories that
//! revisit a light position render once; sample directories receive hard
//! links (copies when linking fails). The manifest is rebuilt byte-identically
//! for identical inputs.

use crate::canvas::{render_canvas_sequence, CanvasGeometry};
use crate::caption::{augment_caption, generate_caption, Caption};
use crate::error::{Error, Result};
use crate::grid::{LightGrid, Trajectory};
use crate::image::Image;
use crate::render::{build_subject_with_resolution, shade_frame, SubjectScene, DEFAULT_LIGHT_INTENSITY};
use crate::text::fnv1a;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

pub const MANIFEST_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub sample_id: String,
    pub subject_id: u64,
    /// All paths are relative to the manifest's directory.
    pub trajectory_path: String,
    pub frames_dir: String,
    pub canvases_dir: String,
    pub caption: String,
    pub caption_variants: Vec<String>,
    pub n_frames: usize,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub grid: LightGrid,
    pub light_gain: f64,
    pub fps: f64,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn sample(&self, sample_id: &str) -> Result<&SampleEntry> {
        self.samples
            .iter()
            .find(|s| s.sample_id == sample_id)
            .ok_or_else(|| Error::SampleNotFound(sample_id.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Loads and validates: referenced paths must exist and frame counts
    /// must match the manifest.
    pub fn load(path: &Path) -> Result<(DatasetManifest, PathBuf)> {
        let root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)?;
        let mut seen = std::collections::HashSet::new();
        for sample in &manifest.samples {
            if !seen.insert(&sample.sample_id) {
                return Err(Error::Invalid(format!(
                    "duplicate sample_id {}",
                    sample.sample_id
                )));
            }
            for (dir, prefix) in [
                (&sample.frames_dir, "frame_"),
                (&sample.canvases_dir, "canvas_"),
            ] {
                let dir = root.join(dir);
                let count = count_numbered(&dir, prefix)?;
                if count != sample.n_frames {
                    return Err(Error::DatasetIntegrity {
                        path: dir,
                        reason: format!("expected {} {prefix}*.png, found {count}", sample.n_frames),
                    });
                }
            }
            let traj = root.join(&sample.trajectory_path);
            if !traj.exists() {
                return Err(Error::DatasetIntegrity {
                    path: traj,
                    reason: "trajectory file missing".into(),
                });
            }
        }
        Ok((manifest, root))
    }
}

fn count_numbered(dir: &Path, prefix: &str) -> Result<usize> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut count = 0;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with(prefix) && name.ends_with(".png") {
            count += 1;
        }
    }
    Ok(count)
}

/// Build inputs for one dataset run.
#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub subjects: Vec<u64>,
    pub trajectories: Vec<PathBuf>,
    pub frames_per_video: usize,
    pub resolution: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub caption_variants: usize,
    pub light_gain: f64,
    pub fps: f64,
}

impl BuildConfig {
    pub fn new(
        subjects: Vec<u64>,
        trajectories: Vec<PathBuf>,
        frames_per_video: usize,
        resolution: usize,
        out_dir: PathBuf,
        seed: u64,
    ) -> Self {
        BuildConfig {
            subjects,
            trajectories,
            frames_per_video,
            resolution,
            out_dir,
            seed,
            caption_variants: 4,
            light_gain: DEFAULT_LIGHT_INTENSITY,
            fps: 8.0,
        }
    }
}

/// Number of videos a full cartesian build would produce; the paper-scale
/// configuration (65 subjects, 3500 trajectories) exceeds 220K without
/// rendering anything.
pub fn video_count(n_subjects: usize, n_trajectories_per_subject: usize) -> usize {
    n_subjects * n_trajectories_per_subject
}

/// Renders every `(subject, trajectory)` pair, writes frames, canvases,
/// captions and `manifest.json`; removes partial output on failure.
pub fn build_dataset(config: &BuildConfig) -> Result<DatasetManifest> {
    if config.subjects.is_empty() || config.trajectories.is_empty() {
        return Err(Error::Invalid("subjects and trajectories must be non-empty".into()));
    }
    let fresh = !config.out_dir.exists();
    let result = build_dataset_inner(config);
    if result.is_err() && fresh {
        let _ = std::fs::remove_dir_all(&config.out_dir);
    }
    result
}

fn sample_seed(base: u64, sample_id: &str) -> u64 {
    base ^ fnv1a(sample_id.as_bytes())
}

fn build_dataset_inner(config: &BuildConfig) -> Result<DatasetManifest> {
    let root = &config.out_dir;
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;

    // load and resample all trajectories up front; grid comes from the first
    let mut trajectories = Vec::new();
    for path in &config.trajectories {
        let traj = Trajectory::load(path)?.resample(config.frames_per_video)?;
        trajectories.push(traj);
    }
    let grid = *trajectories[0].grid();
    for t in &trajectories {
        if *t.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }

    let mut frame_cache: HashMap<u64, PathBuf> = HashMap::new();
    let mut canvas_cache: HashMap<u64, PathBuf> = HashMap::new();
    let mut samples = Vec::new();

    for &subject_id in &config.subjects {
        let scene = build_subject_with_resolution(subject_id, config.resolution);
        let geometry = CanvasGeometry::for_scene(&scene);
        for (traj_idx, trajectory) in trajectories.iter().enumerate() {
            let sample_id = format!("s{subject_id:03}_t{traj_idx:02}");
            let sample_dir = root.join(format!("{subject_id}/{sample_id}"));
            std::fs::create_dir_all(&sample_dir).map_err(|e| Error::io(&sample_dir, e))?;

            // frames, content-addressed per (subject, lights)
            for t in 0..trajectory.len() {
                let lights: Vec<([f64; 3], f64)> = trajectory
                    .lights_at(t)
                    .into_iter()
                    .map(|(p, i)| (p, i * config.light_gain))
                    .collect();
                let key = lights_key(subject_id, config.resolution, &lights);
                let cached = match frame_cache.get(&key) {
                    Some(p) => p.clone(),
                    None => {
                        let img = shade_frame(&scene, &lights)?;
                        let p = cache_path(root, "frames", key)?;
                        img.save_png(&p)?;
                        frame_cache.insert(key, p.clone());
                        p
                    }
                };
                link_or_copy(&cached, &sample_dir.join(format!("frame_{t:05}.png")))?;
            }

            // canvases depend only on lights, shared across subjects
            for t in 0..trajectory.len() {
                let lights: Vec<([f64; 3], f64)> = trajectory
                    .lights_at(t)
                    .into_iter()
                    .map(|(p, i)| (p, i * config.light_gain))
                    .collect();
                let key = lights_key(u64::MAX, config.resolution, &lights);
                let cached = match canvas_cache.get(&key) {
                    Some(p) => p.clone(),
                    None => {
                        let single = trajectory_frame(trajectory, t)?;
                        let seq = render_canvas_sequence(&single, &geometry, config.light_gain)?;
                        let p = cache_path(root, "canvas", key)?;
                        seq.canvases[0].pixels.save_png(&p)?;
                        canvas_cache.insert(key, p.clone());
                        p
                    }
                };
                link_or_copy(&cached, &sample_dir.join(format!("canvas_{t:05}.png")))?;
            }

            // trajectory copy, caption, sidecar metadata
            let traj_rel = format!("{subject_id}/{sample_id}/trajectory.json");
            trajectory.save(&root.join(&traj_rel))?;
            let caption = generate_caption(&scene, sample_seed(config.seed, &sample_id));
            let variants = if config.caption_variants > 0 {
                augment_caption(&caption, config.caption_variants, sample_seed(config.seed, &sample_id))?
            } else {
                Vec::new()
            };
            write_metadata(&sample_dir, &scene, &traj_rel, config.fps, &caption)?;

            samples.push(SampleEntry {
                sample_id,
                subject_id,
                trajectory_path: traj_rel,
                frames_dir: format!("{subject_id}/{}", samples_dir_name(&sample_dir)),
                canvases_dir: format!("{subject_id}/{}", samples_dir_name(&sample_dir)),
                caption: caption.text,
                caption_variants: variants.into_iter().map(|c| c.text).collect(),
                n_frames: trajectory.len(),
                resolution: config.resolution,
            });
        }
    }

    let manifest = DatasetManifest {
        version: MANIFEST_VERSION.to_string(),
        grid,
        light_gain: config.light_gain,
        fps: config.fps,
        samples,
    };
    manifest.save(&root.join("manifest.json"))?;
    Ok(manifest)
}

fn samples_dir_name(sample_dir: &Path) -> String {
    sample_dir
        .file_name()
        .expect("sample dir has a name")
        .to_string_lossy()
        .into_owned()
}

/// A one-frame view of a trajectory, preserving multi-light structure.
fn trajectory_frame(trajectory: &Trajectory, t: usize) -> Result<Trajectory> {
    match trajectory {
        Trajectory::Single(track) => {
            let points = vec![track.points()[t]];
            crate::grid::LightTrajectory::from_points(*track.grid(), points, track.kind())
                .map(Trajectory::Single)
        }
        Trajectory::Multi(m) => {
            let tracks = m
                .tracks()
                .iter()
                .map(|track| {
                    crate::grid::LightTrajectory::from_points(
                        *track.grid(),
                        vec![track.points()[t]],
                        track.kind(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            crate::grid::superpose(tracks, m.intensities().to_vec()).map(Trajectory::Multi)
        }
    }
}

fn lights_key(subject_id: u64, resolution: usize, lights: &[([f64; 3], f64)]) -> u64 {
    let mut desc = format!("{subject_id}|{resolution}");
    for (p, i) in lights {
        desc.push_str(&format!("|{:.6},{:.6},{:.6},{:.6}", p[0], p[1], p[2], i));
    }
    fnv1a(desc.as_bytes())
}

fn cache_path(root: &Path, kind: &str, key: u64) -> Result<PathBuf> {
    let dir = root.join(".cache").join(kind);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir.join(format!("{key:016x}.png")))
}

fn link_or_copy(src: &Path, dst: &Path) -> Result<()> {
    if dst.exists() {
        std::fs::remove_file(dst).map_err(|e| Error::io(dst, e))?;
    }
    if std::fs::hard_link(src, dst).is_err() {
        std::fs::copy(src, dst).map_err(|e| Error::io(dst, e))?;
    }
    Ok(())
}

fn write_metadata(
    sample_dir: &Path,
    scene: &SubjectScene,
    trajectory_path: &str,
    fps: f64,
    caption: &Caption,
) -> Result<()> {
    let meta = serde_json::json!({
        "scene": scene,
        "trajectory": trajectory_path,
        "fps": fps,
        "caption": caption,
    });
    let path = sample_dir.join("metadata.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")
        .map_err(|e| Error::io(&path, e))
}

/// Decoded tensors for one sample.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub frames: Vec<Image>,
    pub canvases: Vec<Image>,
    pub caption: String,
    pub caption_variants: Vec<String>,
}

/// Loads a sample's frames and canvases, validating shapes against the
/// manifest.
pub fn load_sample(manifest: &DatasetManifest, root: &Path, sample_id: &str) -> Result<TrainingSample> {
    let entry = manifest.sample(sample_id)?;
    let mut frames = Vec::with_capacity(entry.n_frames);
    let mut canvases = Vec::with_capacity(entry.n_frames);
    for t in 0..entry.n_frames {
        for (dir, prefix, channels, out) in [
            (&entry.frames_dir, "frame", 3usize, &mut frames),
            (&entry.canvases_dir, "canvas", 1usize, &mut canvases),
        ] {
            let path = root.join(dir).join(format!("{prefix}_{t:05}.png"));
            if !path.exists() {
                return Err(Error::DatasetIntegrity {
                    path,
                    reason: "file missing".into(),
                });
            }
            let img = Image::load_png(&path)?;
            if img.width() != entry.resolution
                || img.height() != entry.resolution
                || img.channels() != channels
            {
                return Err(Error::DatasetIntegrity {
                    path,
                    reason: format!(
                        "expected {}x{}x{channels}, got {}x{}x{}",
                        entry.resolution,
                        entry.resolution,
                        img.width(),
                        img.height(),
                        img.channels()
                    ),
                });
            }
            out.push(img);
        }
    }
    Ok(TrainingSample {
        frames,
        canvases,
        caption: entry.caption.clone(),
        caption_variants: entry.caption_variants.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{linear_trajectory, GridIndex, LightGrid};

    fn write_trajectories(dir: &Path, n: usize, frames: usize) -> Vec<PathBuf> {
        let grid = LightGrid::default_portrait();
        let starts = [
            (GridIndex::new(4, 28, 16), GridIndex::new(28, 28, 16)),
            (GridIndex::new(16, 28, 4), GridIndex::new(16, 28, 28)),
            (GridIndex::new(4, 28, 4), GridIndex::new(28, 28, 28)),
            (GridIndex::new(28, 28, 6), GridIndex::new(6, 28, 26)),
        ];
        (0..n)
            .map(|i| {
                let (s, e) = starts[i % starts.len()];
                let t = linear_trajectory(&grid, s, e, frames).unwrap();
                let path = dir.join(format!("traj_{i}.json"));
                Trajectory::Single(t).save(&path).unwrap();
                path
            })
            .collect()
    }

    fn small_config(out: &Path, traj_dir: &Path) -> BuildConfig {
        let trajectories = write_trajectories(traj_dir, 2, 4);
        let mut cfg = BuildConfig::new(vec![0, 1], trajectories, 4, 32, out.to_path_buf(), 7);
        cfg.caption_variants = 2;
        cfg
    }

    #[test]
    fn cartesian_product_sample_count() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small_config(&tmp.path().join("ds"), tmp.path());
        let manifest = build_dataset(&cfg).unwrap();
        assert_eq!(manifest.samples.len(), 4);
    }

    #[test]
    fn paper_scale_count_formula() {
        assert!(video_count(65, 3500) > 220_000);
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small_config(&tmp.path().join("ds"), tmp.path());
        build_dataset(&cfg).unwrap();
        let first = std::fs::read(cfg.out_dir.join("manifest.json")).unwrap();
        build_dataset(&cfg).unwrap();
        let second = std::fs::read(cfg.out_dir.join("manifest.json")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn load_round_trip_within_quantization() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small_config(&tmp.path().join("ds"), tmp.path());
        let manifest = build_dataset(&cfg).unwrap();
        let (loaded, root) = DatasetManifest::load(&cfg.out_dir.join("manifest.json")).unwrap();
        assert_eq!(manifest, loaded);

        let sample = load_sample(&loaded, &root, &loaded.samples[0].sample_id).unwrap();
        assert_eq!(sample.frames.len(), 4);
        assert_eq!(sample.canvases.len(), 4);
        assert_eq!(sample.frames[0].channels(), 3);
        assert_eq!(sample.canvases[0].channels(), 1);

        // compare against a fresh render
        let entry = &loaded.samples[0];
        let scene = crate::render::build_subject_with_resolution(entry.subject_id, entry.resolution);
        let traj = Trajectory::load(&root.join(&entry.trajectory_path)).unwrap();
        let video = crate::render::render_video(&scene, &traj, loaded.fps, loaded.light_gain).unwrap();
        for (a, b) in video.frames.iter().zip(&sample.frames) {
            assert!(a.max_abs_diff(b) <= 1.0 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn unknown_sample_and_missing_file_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small_config(&tmp.path().join("ds"), tmp.path());
        let manifest = build_dataset(&cfg).unwrap();
        let root = cfg.out_dir.clone();
        assert!(matches!(
            load_sample(&manifest, &root, "nope"),
            Err(Error::SampleNotFound(_))
        ));
        // delete one frame on disk
        let entry = &manifest.samples[0];
        let victim = root.join(&entry.frames_dir).join("frame_00001.png");
        std::fs::remove_file(&victim).unwrap();
        let err = load_sample(&manifest, &root, &entry.sample_id).unwrap_err();
        match err {
            Error::DatasetIntegrity { path, .. } => assert_eq!(path, victim),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn caption_toggle_changes_only_captions() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg_on = small_config(&tmp.path().join("on"), tmp.path());
        let mut cfg_off = cfg_on.clone();
        cfg_off.out_dir = tmp.path().join("off");
        cfg_off.caption_variants = 0;
        let m_on = build_dataset(&cfg_on).unwrap();
        let m_off = build_dataset(&cfg_off).unwrap();
        for (a, b) in m_on.samples.iter().zip(&m_off.samples) {
            assert!(!a.caption_variants.is_empty());
            assert!(b.caption_variants.is_empty());
            assert_eq!(a.caption, b.caption);
            // pixels identical
            let sa = load_sample(&m_on, &cfg_on.out_dir, &a.sample_id).unwrap();
            let sb = load_sample(&m_off, &cfg_off.out_dir, &b.sample_id).unwrap();
            for (fa, fb) in sa.frames.iter().zip(&sb.frames) {
                assert_eq!(fa, fb);
            }
        }
    }
}
