//! `evaluate`: run the five lighting-fidelity metrics on a directory of
//! generated frames against a reference sample directory.

use crate::error::CliError;
use lumiforge_core::image::Image;
use lumiforge_core::metrics::{
    evaluate, CaptionColorTextEmbedder, ColorMomentEmbedder, MetricsReport,
    RandomProjectionEmbedder,
};
use std::path::Path;

/// Seed for the default random-projection frame embedder; fixed so reports
/// are comparable across runs of one artifact.
pub const EMBEDDER_SEED: u64 = 0x4c55_4d49;
pub const EMBEDDER_DIM: usize = 64;

/// Loads `<prefix>NNNNN.png` files from `dir` in frame order.
pub fn load_frames(dir: &Path, prefix: &str) -> Result<Vec<Image>, CliError> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(prefix) && n.ends_with(".png"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Run {
            kind: "evaluate".into(),
            detail: format!("no {prefix}*.png in {}", dir.display()),
        });
    }
    names
        .iter()
        .map(|n| Image::load_png(&dir.join(n)).map_err(CliError::from))
        .collect()
}

/// Caption text from a sample directory's `metadata.json`.
pub fn caption_from_metadata(reference_dir: &Path) -> Result<String, CliError> {
    let path = reference_dir.join("metadata.json");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Run {
        kind: "evaluate".into(),
        detail: format!(
            "no --caption given and cannot read {}: {e}",
            path.display()
        ),
    })?;
    let meta: serde_json::Value = serde_json::from_str(&text)?;
    meta["caption"]["text"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| CliError::Run {
            kind: "evaluate".into(),
            detail: format!("{} has no caption.text field", path.display()),
        })
}

/// Full report from on-disk inputs. The reference directory must hold the
/// ground-truth `frame_*.png` (brightness reference) and `canvas_*.png`
/// (direction reference) of one dataset sample.
pub fn run_evaluate(
    video_dir: &Path,
    reference_dir: &Path,
    caption: Option<&str>,
    out: &Path,
    csv: Option<&Path>,
) -> Result<MetricsReport, CliError> {
    let frames = load_frames(video_dir, "frame_")?;
    let reference_frames = load_frames(reference_dir, "frame_")?;
    let reference_canvases = load_frames(reference_dir, "canvas_")?;
    let caption = match caption {
        Some(c) => c.to_string(),
        None => caption_from_metadata(reference_dir)?,
    };
    let report = evaluate_frames(&frames, &reference_canvases, &reference_frames, &caption)?;
    write_report(&report, out, csv)?;
    Ok(report)
}

/// In-memory evaluation with the default deterministic embedders.
pub fn evaluate_frames(
    frames: &[Image],
    reference_canvases: &[Image],
    reference_brightness: &[Image],
    caption: &str,
) -> Result<MetricsReport, CliError> {
    let frame_embedder = RandomProjectionEmbedder::new(EMBEDDER_SEED, EMBEDDER_DIM);
    Ok(evaluate(
        frames,
        reference_canvases,
        reference_brightness,
        caption,
        &frame_embedder,
        &ColorMomentEmbedder,
        &CaptionColorTextEmbedder,
    )?)
}

pub fn write_report(
    report: &MetricsReport,
    out: &Path,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out, serde_json::to_string_pretty(report)? + "\n")?;
    if let Some(csv_path) = csv {
        let mut text =
            String::from("frame,dir_x,dir_y,ref_dir_x,ref_dir_y,direction_error,brightness_score\n");
        for d in &report.per_frame_detail {
            let pair = |v: Option<[f32; 2]>| match v {
                Some([x, y]) => format!("{x:.6},{y:.6}"),
                None => ",".to_string(),
            };
            text.push_str(&format!(
                "{},{},{},{},{:.6}\n",
                d.frame,
                pair(d.direction),
                pair(d.reference_direction),
                d.direction_error
                    .map(|e| format!("{e:.6}"))
                    .unwrap_or_default(),
                d.brightness_score,
            ));
        }
        std::fs::write(csv_path, text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(v: f32) -> Image {
        Image::from_data(16, 16, 3, vec![v; 16 * 16 * 3]).unwrap()
    }

    fn gradient() -> Image {
        let mut img = Image::new(16, 16, 3);
        for y in 0..16 {
            for x in 0..16 {
                for c in 0..3 {
                    img.set(x, y, c, x as f32 / 15.0);
                }
            }
        }
        img
    }

    #[test]
    fn self_evaluation_hits_identity_values() {
        let frames: Vec<Image> = (0..4).map(|_| gradient()).collect();
        let report = evaluate_frames(&frames, &frames, &frames, "a portrait").unwrap();
        assert!((report.consistency_embed - 1.0).abs() < 1e-6);
        assert!(report.consistency_perceptual.abs() < 1e-6);
        assert!(report.direction_rmse.abs() < 1e-6);
        assert!((report.brightness_consistency - 1.0).abs() < 1e-6);
    }

    #[test]
    fn report_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Image> = (0..3).map(|_| flat(0.5)).collect();
        let refs: Vec<Image> = (0..3).map(|_| gradient()).collect();
        let report = evaluate_frames(&frames, &refs, &refs, "x").unwrap();
        let out = dir.path().join("report.json");
        let csv = dir.path().join("report.csv");
        write_report(&report, &out, Some(&csv)).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let parsed: MetricsReport = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.per_frame_detail.len(), 3);
        assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 3);
    }
}
