//! Lighting-fidelity evaluation: five video metrics plus the per-frame
//! light-direction estimator.
//!
//! Pretrained perceptual networks are deliberately absent; frame and text
//! embedders are pluggable behind [`FrameEmbedder`] / [`TextEmbedder`] and
//! the shipped defaults are deterministic proxies (seeded random projection,
//! multi-scale gradient distance, color-moment joint embedding). Scores are
//! comparable within one artifact run, not against externally published
//! numbers.

use crate::caption::BACKDROP_PALETTE;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::par::{self, ExecMode};
use crate::text;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// embedder interfaces
// ---------------------------------------------------------------------------

/// Deterministic image-to-unit-vector embedding.
pub trait FrameEmbedder: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// L2-normalized embedding (zero vector allowed for degenerate input).
    fn embed(&self, image: &Image) -> Vec<f32>;
}

/// Deterministic text-to-unit-vector embedding.
pub trait TextEmbedder: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f32>;
}

fn l2_normalize(v: &mut [f32]) {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    }
}

fn cosine(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Seeded Gaussian random projection of a 16x16 luminance thumbnail.
pub struct RandomProjectionEmbedder {
    matrix: Vec<f32>, // dim x 256
    dim: usize,
}

impl RandomProjectionEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrix = (0..dim * 256)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) as f32)
            .collect();
        RandomProjectionEmbedder { matrix, dim }
    }

    fn thumbnail(image: &Image) -> [f32; 256] {
        let lum = image.luminance();
        let (w, h) = (image.width(), image.height());
        let mut out = [0f32; 256];
        for ty in 0..16 {
            for tx in 0..16 {
                let x0 = tx * w / 16;
                let x1 = ((tx + 1) * w / 16).max(x0 + 1);
                let y0 = ty * h / 16;
                let y1 = ((ty + 1) * h / 16).max(y0 + 1);
                let mut sum = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        sum += lum[y * w + x];
                    }
                }
                out[ty * 16 + tx] = sum / ((x1 - x0) * (y1 - y0)) as f32;
            }
        }
        out
    }
}

impl FrameEmbedder for RandomProjectionEmbedder {
    fn name(&self) -> &str {
        "random-projection"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, image: &Image) -> Vec<f32> {
        let thumb = Self::thumbnail(image);
        let mut out = vec![0f32; self.dim];
        for (d, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[d * 256..(d + 1) * 256];
            *o = row.iter().zip(thumb.iter()).map(|(m, t)| m * t).sum();
        }
        l2_normalize(&mut out);
        out
    }
}

/// Hashed bag-of-tokens text embedder.
pub struct HashedTextEmbedder {
    dim: usize,
}

impl HashedTextEmbedder {
    pub fn new(dim: usize) -> Self {
        HashedTextEmbedder { dim }
    }
}

impl TextEmbedder for HashedTextEmbedder {
    fn name(&self) -> &str {
        "hashed-bow"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, s: &str) -> Vec<f32> {
        text::embed_text(s, self.dim)
    }
}

// ---------------------------------------------------------------------------
// color-moment joint space (default text-video pair)
// ---------------------------------------------------------------------------

const JOINT_DIM: usize = 6;

/// Image side of the default joint space: border mean color (backdrop) and
/// center mean color (subject), 6 dims.
pub struct ColorMomentEmbedder;

impl FrameEmbedder for ColorMomentEmbedder {
    fn name(&self) -> &str {
        "color-moment"
    }

    fn dim(&self) -> usize {
        JOINT_DIM
    }

    fn embed(&self, image: &Image) -> Vec<f32> {
        let (w, h) = (image.width(), image.height());
        let margin_x = w / 8;
        let margin_y = h / 8;
        let mut border = [0f64; 3];
        let mut border_n = 0usize;
        let mut center = [0f64; 3];
        let mut center_n = 0usize;
        for y in 0..h {
            for x in 0..w {
                let is_border = x < margin_x || x >= w - margin_x || y < margin_y || y >= h - margin_y;
                let in_center = x >= w / 4 && x < 3 * w / 4 && y >= h / 4 && y < 3 * h / 4;
                for c in 0..3 {
                    let v = image.get(x, y, c.min(image.channels() - 1)) as f64;
                    if is_border {
                        border[c] += v;
                    }
                    if in_center {
                        center[c] += v;
                    }
                }
                if is_border {
                    border_n += 1;
                }
                if in_center {
                    center_n += 1;
                }
            }
        }
        let mut out = vec![0f32; JOINT_DIM];
        for c in 0..3 {
            out[c] = (border[c] / border_n.max(1) as f64) as f32;
            out[3 + c] = (center[c] / center_n.max(1) as f64) as f32;
        }
        l2_normalize(&mut out);
        out
    }
}

/// Text side of the default joint space: maps backdrop color words and skin
/// adjectives in the caption onto the same 6 color dims.
pub struct CaptionColorTextEmbedder;

const SKIN_PROTOTYPES: &[(&str, [f32; 3])] = &[
    ("fair-skinned", [0.95, 0.80, 0.70]),
    ("tan", [0.78, 0.62, 0.53]),
    ("olive-skinned", [0.62, 0.47, 0.38]),
    ("dark-skinned", [0.45, 0.30, 0.22]),
];

impl TextEmbedder for CaptionColorTextEmbedder {
    fn name(&self) -> &str {
        "caption-color"
    }

    fn dim(&self) -> usize {
        JOINT_DIM
    }

    fn embed(&self, s: &str) -> Vec<f32> {
        let lower = s.to_lowercase();
        let mut out = vec![0f32; JOINT_DIM];
        for &(name, rgb) in BACKDROP_PALETTE {
            if lower.contains(name) {
                for c in 0..3 {
                    out[c] += rgb[c];
                }
            }
        }
        for &(name, rgb) in SKIN_PROTOTYPES {
            if lower.contains(name) {
                for c in 0..3 {
                    out[3 + c] += rgb[c];
                }
            }
        }
        l2_normalize(&mut out);
        out
    }
}

// ---------------------------------------------------------------------------
// metric 1: frame-embedding consistency
// ---------------------------------------------------------------------------

/// Mean cosine similarity of consecutive frame embeddings.
pub fn frame_embedding_consistency(frames: &[Image], embedder: &dyn FrameEmbedder) -> Result<f32> {
    if frames.len() < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            got: frames.len(),
        });
    }
    let embeddings = par::map(frames.len(), ExecMode::auto(), |i| embedder.embed(&frames[i]));
    let sum: f32 = embeddings.windows(2).map(|w| cosine(&w[0], &w[1])).sum();
    Ok(sum / (frames.len() - 1) as f32)
}

// ---------------------------------------------------------------------------
// metric 2: perceptual consistency (multi-scale gradient distance)
// ---------------------------------------------------------------------------

fn gradient_magnitude(lum: &Image) -> Vec<f32> {
    let (w, h) = (lum.width(), lum.height());
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(h - 1);
            let gx = (lum.get(xp, y, 0) - lum.get(xm, y, 0)) * 0.5;
            let gy = (lum.get(x, yp, 0) - lum.get(x, ym, 0)) * 0.5;
            out[y * w + x] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

fn luminance_image(image: &Image) -> Image {
    Image::from_data(image.width(), image.height(), 1, image.luminance()).expect("shape preserved")
}

/// Multi-scale gradient-magnitude distance between two frames; zero iff the
/// gradient structure matches at scales 1, 1/2 and 1/4.
pub fn perceptual_distance(a: &Image, b: &Image) -> Result<f32> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", a.height(), a.width()),
            got: format!("{}x{}", b.height(), b.width()),
        });
    }
    let mut la = luminance_image(a);
    let mut lb = luminance_image(b);
    let mut total = 0f64;
    for _scale in 0..3 {
        let ga = gradient_magnitude(&la);
        let gb = gradient_magnitude(&lb);
        let mse: f64 = ga
            .iter()
            .zip(&gb)
            .map(|(x, y)| ((x - y) as f64).powi(2))
            .sum::<f64>()
            / ga.len() as f64;
        total += mse.sqrt();
        la = la.downsample_half();
        lb = lb.downsample_half();
    }
    Ok(total as f32)
}

/// Mean perceptual distance over consecutive frame pairs; lower is better.
pub fn perceptual_consistency(frames: &[Image]) -> Result<f32> {
    if frames.len() < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            got: frames.len(),
        });
    }
    let dists = par::try_map(frames.len() - 1, ExecMode::auto(), |i| {
        perceptual_distance(&frames[i], &frames[i + 1])
    })?;
    Ok(dists.iter().sum::<f32>() / dists.len() as f32)
}

// ---------------------------------------------------------------------------
// metric 3: lighting direction
// ---------------------------------------------------------------------------

/// Dominant lighting direction of one frame in image coordinates
/// (x right, y up), as a unit vector from the image center toward the
/// intensity-weighted centroid of the brightest decile.
///
/// Returns `None` for an all-black frame (undefined); a centroid at the
/// center encodes frontal lighting as `(0, 0)`.
pub fn estimate_direction(frame: &Image) -> Option<[f32; 2]> {
    let lum = frame.luminance();
    let max = lum.iter().cloned().fold(0f32, f32::max);
    if max <= 0.0 {
        return None;
    }
    let mut sorted = lum.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q_idx = ((sorted.len() - 1) as f64 * 0.9).round() as usize;
    let threshold = sorted[q_idx];
    let (w, h) = (frame.width(), frame.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut sx = 0f64;
    let mut sy = 0f64;
    let mut sw = 0f64;
    for y in 0..h {
        for x in 0..w {
            let v = lum[y * w + x] as f64;
            if lum[y * w + x] >= threshold && v > 0.0 {
                sx += v * x as f64;
                sy += v * y as f64;
                sw += v;
            }
        }
    }
    if sw <= 0.0 {
        return None;
    }
    let dx = sx / sw - cx;
    let dy = cy - sy / sw; // flip: image y grows downward, direction y up
    let norm = (dx * dx + dy * dy).sqrt();
    if norm < 0.5 {
        return Some([0.0, 0.0]);
    }
    Some([(dx / norm) as f32, (dy / norm) as f32])
}

/// RMSE of per-frame direction differences between a generated video and
/// reference canvases; frames with undefined direction on either side are
/// skipped.
pub fn direction_rmse(frames: &[Image], reference: &[Image]) -> Result<f32> {
    if frames.len() != reference.len() {
        return Err(Error::SequenceLengthMismatch {
            a: frames.len(),
            b: reference.len(),
        });
    }
    let mut sum_sq = 0f64;
    let mut n = 0usize;
    for (f, r) in frames.iter().zip(reference) {
        if let (Some(df), Some(dr)) = (estimate_direction(f), estimate_direction(r)) {
            let e = ((df[0] - dr[0]) as f64).powi(2) + ((df[1] - dr[1]) as f64).powi(2);
            sum_sq += e;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Invalid("no frames with a defined lighting direction".into()));
    }
    Ok((sum_sq / n as f64).sqrt() as f32)
}

// ---------------------------------------------------------------------------
// metric 4: brightness distribution consistency
// ---------------------------------------------------------------------------

/// 8x8 patch mean-luminance distribution, normalized to sum 1; all-zero
/// frames fall back to the uniform distribution.
pub fn brightness_distribution(frame: &Image) -> [f32; 64] {
    let lum = frame.luminance();
    let (w, h) = (frame.width(), frame.height());
    let mut out = [0f32; 64];
    for py in 0..8 {
        for px in 0..8 {
            let x0 = px * w / 8;
            let x1 = ((px + 1) * w / 8).max(x0 + 1);
            let y0 = py * h / 8;
            let y1 = ((py + 1) * h / 8).max(y0 + 1);
            let mut sum = 0f32;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += lum[y * w + x];
                }
            }
            out[py * 8 + px] = sum / ((x1 - x0) * (y1 - y0)) as f32;
        }
    }
    let total: f32 = out.iter().sum();
    if total <= 0.0 {
        return [1.0 / 64.0; 64];
    }
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Mean histogram intersection of per-frame brightness distributions;
/// invariant to global intensity scaling by construction.
pub fn brightness_consistency(frames: &[Image], reference: &[Image]) -> Result<f32> {
    if frames.len() != reference.len() {
        return Err(Error::SequenceLengthMismatch {
            a: frames.len(),
            b: reference.len(),
        });
    }
    if frames.is_empty() {
        return Err(Error::TooFewFrames { required: 1, got: 0 });
    }
    let scores = par::map(frames.len(), ExecMode::auto(), |i| {
        let p = brightness_distribution(&frames[i]);
        let q = brightness_distribution(&reference[i]);
        p.iter().zip(&q).map(|(a, b)| a.min(*b)).sum::<f32>()
    });
    Ok(scores.iter().sum::<f32>() / scores.len() as f32)
}

// ---------------------------------------------------------------------------
// metric 5: text-video similarity
// ---------------------------------------------------------------------------

/// Mean cosine similarity between per-frame embeddings and the caption
/// embedding; both sides must share one joint space.
pub fn text_video_similarity(
    frames: &[Image],
    caption: &str,
    image_embedder: &dyn FrameEmbedder,
    text_embedder: &dyn TextEmbedder,
) -> Result<f32> {
    if image_embedder.dim() != text_embedder.dim() {
        return Err(Error::DimensionMismatch {
            a: image_embedder.dim(),
            b: text_embedder.dim(),
        });
    }
    if frames.is_empty() {
        return Err(Error::TooFewFrames { required: 1, got: 0 });
    }
    let t = text_embedder.embed(caption);
    let sims = par::map(frames.len(), ExecMode::auto(), |i| {
        cosine(&image_embedder.embed(&frames[i]), &t)
    });
    Ok(sims.iter().sum::<f32>() / sims.len() as f32)
}

// ---------------------------------------------------------------------------
// report assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerFrameDetail {
    pub frame: usize,
    pub direction: Option<[f32; 2]>,
    pub reference_direction: Option<[f32; 2]>,
    pub direction_error: Option<f32>,
    pub brightness_score: f32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub consistency_embed: f32,
    pub consistency_perceptual: f32,
    pub direction_rmse: f32,
    pub brightness_consistency: f32,
    pub text_similarity: f32,
    pub per_frame_detail: Vec<PerFrameDetail>,
}

/// Runs all five metrics against reference canvases (direction) and
/// reference frames (brightness), using the supplied embedders.
pub fn evaluate(
    frames: &[Image],
    reference_canvases: &[Image],
    reference_brightness: &[Image],
    caption: &str,
    frame_embedder: &dyn FrameEmbedder,
    joint_image: &dyn FrameEmbedder,
    joint_text: &dyn TextEmbedder,
) -> Result<MetricsReport> {
    let consistency_embed = frame_embedding_consistency(frames, frame_embedder)?;
    let consistency_perceptual = perceptual_consistency(frames)?;
    let rmse = direction_rmse(frames, reference_canvases)?;
    let brightness = brightness_consistency(frames, reference_brightness)?;
    let text_sim = text_video_similarity(frames, caption, joint_image, joint_text)?;

    let per_frame_detail = frames
        .iter()
        .zip(reference_canvases)
        .zip(reference_brightness)
        .enumerate()
        .map(|(i, ((f, rc), rb))| {
            let direction = estimate_direction(f);
            let reference_direction = estimate_direction(rc);
            let direction_error = match (direction, reference_direction) {
                (Some(a), Some(b)) => {
                    Some(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
                }
                _ => None,
            };
            let p = brightness_distribution(f);
            let q = brightness_distribution(rb);
            let brightness_score = p.iter().zip(&q).map(|(a, b)| a.min(*b)).sum::<f32>();
            PerFrameDetail {
                frame: i,
                direction,
                reference_direction,
                direction_error,
                brightness_score,
            }
        })
        .collect();

    Ok(MetricsReport {
        consistency_embed,
        consistency_perceptual,
        direction_rmse: rmse,
        brightness_consistency: brightness,
        text_similarity: text_sim,
        per_frame_detail,
    })
}
