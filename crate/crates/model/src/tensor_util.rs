//! Small tensor helpers shared across the model crate.
//!
//! All randomness flows through `ChaCha8Rng` so tensors are reproducible
//! across runs and platforms; candle's own samplers are never used.

use crate::error::{Error, Result};
use candle_core::{Device, Tensor};
use lumiforge_core::image::Image;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Standard-normal tensor drawn from the caller's RNG.
pub fn randn(rng: &mut ChaCha8Rng, shape: &[usize], device: &Device) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    let data: Vec<f32> = (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            v as f32
        })
        .collect();
    Ok(Tensor::from_vec(data, shape, device)?)
}

/// `(F, C, H, W)` tensor from per-frame images; single-channel images are
/// replicated to three channels when `channels` asks for it.
pub fn frames_to_tensor(frames: &[Image], channels: usize, device: &Device) -> Result<Tensor> {
    if frames.is_empty() {
        return Err(Error::Invalid("no frames".into()));
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    let mut data = Vec::with_capacity(frames.len() * channels * h * w);
    for frame in frames {
        let frame = if frame.channels() == 1 && channels == 3 {
            frame.replicate_to_rgb()
        } else {
            frame.clone()
        };
        if frame.width() != w || frame.height() != h || frame.channels() != channels {
            return Err(Error::Incompatible(format!(
                "frame {}x{}x{} in a {}x{}x{} batch",
                frame.width(),
                frame.height(),
                frame.channels(),
                w,
                h,
                channels
            )));
        }
        // HWC interleaved -> CHW planar
        for c in 0..channels {
            for y in 0..h {
                for x in 0..w {
                    data.push(frame.get(x, y, c));
                }
            }
        }
    }
    Ok(Tensor::from_vec(data, &[frames.len(), channels, h, w], device)?)
}

/// Inverse of [`frames_to_tensor`]: `(F, C, H, W)` back to images.
pub fn tensor_to_frames(t: &Tensor) -> Result<Vec<Image>> {
    let (f, c, h, w) = t.dims4()?;
    let flat = t.flatten_all()?.to_vec1::<f32>()?;
    let mut frames = Vec::with_capacity(f);
    for fi in 0..f {
        let mut img = Image::new(w, h, c);
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    img.set(x, y, ci, flat[((fi * c + ci) * h + y) * w + x]);
                }
            }
        }
        frames.push(img);
    }
    Ok(frames)
}

/// Parameter-free layer norm over the last dimension.
pub fn layer_norm(x: &Tensor) -> Result<Tensor> {
    let dims = x.dims();
    let last = dims.len() - 1;
    let mean = x.mean_keepdim(last)?;
    let centered = x.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(last)?;
    let denom = (var + 1e-6)?.sqrt()?;
    Ok(centered.broadcast_div(&denom)?)
}

/// `x @ w^T + b` for `(n, d_in)` inputs and `(d_out, d_in)` weights.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    Ok(x.matmul(&w.t()?)?.broadcast_add(b)?)
}

pub fn scalar_f64(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
}
