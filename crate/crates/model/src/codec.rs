//! Shared convolutional VAE codec: per-frame 2D encoder/decoder mapping
//! `[0,1]` RGB frames to `C_lat`-channel latents at `1/f` resolution.
//!
//! "Shared" is structural: subject frames and (channel-replicated) lighting
//! canvases pass through the same weights, and exactly one codec object
//! exists per pipeline. Conditioning always uses the posterior mean; the
//! posterior is sampled only inside codec training.

use crate::error::{Error, Result};
use crate::params::{init_normal, zeros, ParamMap};
use crate::tensor_util::{frames_to_tensor, randn, scalar_f64, tensor_to_frames};
use candle_core::{Device, Tensor};
use candle_nn::Optimizer;
use lumiforge_core::dataset::{load_sample, DatasetManifest};
use lumiforge_core::image::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecConfig {
    /// Spatial downsample factor; must be a power of two.
    pub f: usize,
    pub c_lat: usize,
    pub kl_weight: f64,
    pub hidden: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            f: 4,
            c_lat: 4,
            kl_weight: 1e-6,
            hidden: 32,
        }
    }
}

impl CodecConfig {
    fn validate(&self) -> Result<()> {
        if !self.f.is_power_of_two() || self.f < 2 {
            return Err(Error::Invalid(format!("f={} must be a power of two >= 2", self.f)));
        }
        if self.c_lat == 0 || self.hidden == 0 {
            return Err(Error::Invalid("c_lat and hidden must be >= 1".into()));
        }
        if self.kl_weight < 0.0 {
            return Err(Error::Invalid("kl_weight must be non-negative".into()));
        }
        Ok(())
    }

    fn n_down(&self) -> usize {
        self.f.trailing_zeros() as usize
    }
}

pub struct Codec {
    config: CodecConfig,
    params: ParamMap,
}

fn conv_init(p: &mut ParamMap, rng: &mut ChaCha8Rng, name: &str, c_out: usize, c_in: usize, k: usize) -> Result<()> {
    p.insert(
        &format!("{name}.weight"),
        init_normal(rng, c_out * c_in * k * k, c_in * k * k),
        &[c_out, c_in, k, k],
    )?;
    p.insert(&format!("{name}.bias"), zeros(c_out), &[c_out])
}

fn deconv_init(p: &mut ParamMap, rng: &mut ChaCha8Rng, name: &str, c_in: usize, c_out: usize, k: usize) -> Result<()> {
    // conv_transpose2d weights are (C_in, C_out, k, k)
    p.insert(
        &format!("{name}.weight"),
        init_normal(rng, c_in * c_out * k * k, c_in * k * k),
        &[c_in, c_out, k, k],
    )?;
    p.insert(&format!("{name}.bias"), zeros(c_out), &[c_out])
}

fn bias_add(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let c = bias.dims1()?;
    Ok(x.broadcast_add(&bias.reshape(&[1, c, 1, 1])?)?)
}

impl Codec {
    pub fn new(config: CodecConfig, seed: u64, trainable: bool, device: &Device) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamMap::new(trainable, device);
        let h = config.hidden;
        let n_down = config.n_down();

        conv_init(&mut p, &mut rng, "enc.in", h, 3, 3)?;
        for s in 0..n_down {
            conv_init(&mut p, &mut rng, &format!("enc.down{s}"), h << (s + 1), h << s, 3)?;
        }
        conv_init(&mut p, &mut rng, "enc.out", 2 * config.c_lat, h << n_down, 3)?;

        conv_init(&mut p, &mut rng, "dec.in", h << n_down, config.c_lat, 3)?;
        for s in 0..n_down {
            deconv_init(
                &mut p,
                &mut rng,
                &format!("dec.up{s}"),
                h << (n_down - s),
                h << (n_down - s - 1),
                4,
            )?;
        }
        conv_init(&mut p, &mut rng, "dec.out", 3, h, 3)?;

        Ok(Codec { config, params: p })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamMap {
        &self.params
    }

    fn conv(&self, x: &Tensor, name: &str, stride: usize) -> Result<Tensor> {
        let w = self.params.get(&format!("{name}.weight"))?;
        let b = self.params.get(&format!("{name}.bias"))?;
        bias_add(&x.conv2d(w, 1, stride, 1, 1)?, b)
    }

    fn deconv(&self, x: &Tensor, name: &str) -> Result<Tensor> {
        let w = self.params.get(&format!("{name}.weight"))?;
        let b = self.params.get(&format!("{name}.bias"))?;
        bias_add(&x.conv_transpose2d(w, 1, 0, 2, 1)?, b)
    }

    /// Posterior `(mean, logvar)` for a `(F, 3, H, W)` video tensor.
    pub fn encode(&self, video: &Tensor) -> Result<(Tensor, Tensor)> {
        let (_f, c, h, w) = video.dims4()?;
        if c != 3 {
            return Err(Error::Incompatible(format!("expected 3 channels, got {c}")));
        }
        if h % self.config.f != 0 || w % self.config.f != 0 {
            return Err(Error::Incompatible(format!(
                "spatial size {h}x{w} not divisible by f={}",
                self.config.f
            )));
        }
        let mut x = candle_nn::ops::silu(&self.conv(video, "enc.in", 1)?)?;
        for s in 0..self.config.n_down() {
            x = candle_nn::ops::silu(&self.conv(&x, &format!("enc.down{s}"), 2)?)?;
        }
        let out = self.conv(&x, "enc.out", 1)?;
        let mean = out.narrow(1, 0, self.config.c_lat)?;
        let logvar = out.narrow(1, self.config.c_lat, self.config.c_lat)?;
        // keep the posterior well-conditioned for the KL term
        let logvar = logvar.clamp(-30.0, 20.0)?;
        Ok((mean, logvar))
    }

    /// Deterministic latent (posterior mean), the form used for
    /// conditioning and diffusion targets.
    pub fn encode_mean(&self, video: &Tensor) -> Result<Tensor> {
        Ok(self.encode(video)?.0)
    }

    /// Raw decoder output, unclamped (used by training losses).
    pub fn decode_raw(&self, latent: &Tensor) -> Result<Tensor> {
        let (_f, c, _h, _w) = latent.dims4()?;
        if c != self.config.c_lat {
            return Err(Error::Incompatible(format!(
                "latent has {c} channels, codec expects {}",
                self.config.c_lat
            )));
        }
        let mut x = candle_nn::ops::silu(&self.conv(latent, "dec.in", 1)?)?;
        for s in 0..self.config.n_down() {
            x = candle_nn::ops::silu(&self.deconv(&x, &format!("dec.up{s}"))?)?;
        }
        self.conv(&x, "dec.out", 1)
    }

    /// Decoded video clamped to `[0, 1]`.
    pub fn decode(&self, latent: &Tensor) -> Result<Tensor> {
        Ok(self.decode_raw(latent)?.clamp(0.0, 1.0)?)
    }

    pub fn encode_frames(&self, frames: &[Image]) -> Result<Tensor> {
        let video = frames_to_tensor(frames, 3, self.params.device())?;
        self.encode_mean(&video)
    }

    pub fn decode_to_frames(&self, latent: &Tensor) -> Result<Vec<Image>> {
        tensor_to_frames(&self.decode(latent)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::checkpoint::save(path, "codec", &self.config, self.params.named_tensors())
    }

    pub fn load(path: &Path, trainable: bool, device: &Device) -> Result<Self> {
        let (config, tensors) =
            crate::checkpoint::load_as::<CodecConfig>(path, "codec", device)?;
        let mut codec = Codec::new(config, 0, trainable, device)?;
        codec.params.load_from(&tensors)?;
        Ok(codec)
    }
}

/// All frames and canvases in the dataset as individual images; canvases
/// pass through the same codec after channel replication.
pub fn collect_codec_images(manifest: &DatasetManifest, root: &Path) -> Result<Vec<Image>> {
    let mut images = Vec::new();
    for entry in &manifest.samples {
        let sample = load_sample(manifest, root, &entry.sample_id)?;
        images.extend(sample.frames);
        images.extend(sample.canvases.iter().map(Image::replicate_to_rgb));
    }
    if images.is_empty() {
        return Err(Error::Invalid("dataset has no frames".into()));
    }
    Ok(images)
}

pub struct CodecTrainReport {
    pub losses: Vec<f64>,
}

/// Reconstruction MSE + `kl_weight`·KL over random frame batches.
pub fn train_codec(
    codec: &mut Codec,
    images: &[Image],
    steps: usize,
    batch: usize,
    lr: f64,
    seed: u64,
) -> Result<CodecTrainReport> {
    if !codec.params.trainable() {
        return Err(Error::Invalid("codec is frozen".into()));
    }
    if images.is_empty() {
        return Err(Error::Invalid("no training images".into()));
    }
    let device = codec.params.device().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = candle_nn::AdamW::new(
        codec.params.var_list(),
        candle_nn::ParamsAdamW {
            lr,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?;
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let picks: Vec<&Image> = (0..batch)
            .map(|_| &images[rng.gen_range(0..images.len())])
            .collect();
        let x = frames_to_tensor(
            &picks.iter().map(|&i| i.clone()).collect::<Vec<_>>(),
            3,
            &device,
        )?;
        let (mean, logvar) = codec.encode(&x)?;
        let noise = randn(&mut rng, mean.dims(), &device)?;
        let z = (&mean + ((logvar.clone() * 0.5)?.exp()? * noise)?)?;
        let recon = codec.decode_raw(&z)?;
        let mse = (recon - &x)?.sqr()?.mean_all()?;
        // KL(q || N(0,1)) averaged over elements
        let kl = ((mean.sqr()? + logvar.exp()?)? - (logvar + 1.0)?)?
            .mean_all()?
            .affine(0.5, 0.0)?;
        let loss = (mse + (kl * codec.config.kl_weight)?)?;
        let value = scalar_f64(&loss)?;
        if !value.is_finite() {
            return Err(Error::NanLoss {
                step,
                detail: format!("codec loss {value}"),
            });
        }
        opt.backward_step(&loss)?;
        losses.push(value);
    }
    Ok(CodecTrainReport { losses })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_codec(trainable: bool) -> Codec {
        Codec::new(CodecConfig::default(), 11, trainable, &Device::Cpu).unwrap()
    }

    #[test]
    fn shape_arithmetic() {
        let codec = small_codec(false);
        let x = Tensor::zeros(&[16, 3, 64, 64], candle_core::DType::F32, &Device::Cpu).unwrap();
        let z = codec.encode_mean(&x).unwrap();
        assert_eq!(z.dims(), &[16, 4, 16, 16]);
        let y = codec.decode(&z).unwrap();
        assert_eq!(y.dims(), &[16, 3, 64, 64]);
    }

    #[test]
    fn zero_video_and_zero_latent_finite() {
        let codec = small_codec(false);
        let x = Tensor::zeros(&[2, 3, 32, 32], candle_core::DType::F32, &Device::Cpu).unwrap();
        let (mean, logvar) = codec.encode(&x).unwrap();
        for t in [&mean, &logvar] {
            let v = t.flatten_all().unwrap().to_vec1::<f32>().unwrap();
            assert!(v.iter().all(|x| x.is_finite()));
        }
        let z = Tensor::zeros(&[2, 4, 8, 8], candle_core::DType::F32, &Device::Cpu).unwrap();
        let y = codec.decode(&z).unwrap();
        let v = y.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!(v.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)));
    }

    #[test]
    fn indivisible_size_rejected() {
        let codec = small_codec(false);
        let x = Tensor::zeros(&[1, 3, 64, 63], candle_core::DType::F32, &Device::Cpu).unwrap();
        assert!(codec.encode(&x).is_err());
    }

    #[test]
    fn checkpoint_round_trip_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codec.ckpt");
        let codec = small_codec(false);
        codec.save(&path).unwrap();
        let loaded = Codec::load(&path, false, &Device::Cpu).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = randn(&mut rng, &[2, 3, 32, 32], &Device::Cpu)
            .unwrap()
            .clamp(0.0, 1.0)
            .unwrap();
        let a = codec.encode_mean(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let b = loaded.encode_mean(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_training_reduces_loss_and_is_deterministic() {
        let images: Vec<Image> = (0..4)
            .map(|i| {
                let mut img = Image::new(16, 16, 3);
                for y in 0..16 {
                    for x in 0..16 {
                        for c in 0..3 {
                            img.set(x, y, c, ((x + y + i + c) % 7) as f32 / 6.0);
                        }
                    }
                }
                img
            })
            .collect();
        let cfg = CodecConfig {
            hidden: 8,
            ..Default::default()
        };
        let mut a = Codec::new(cfg.clone(), 5, true, &Device::Cpu).unwrap();
        let report_a = train_codec(&mut a, &images, 30, 2, 1e-3, 9).unwrap();
        assert!(
            report_a.losses.last().unwrap() < &report_a.losses[0],
            "{:?}",
            (report_a.losses.first(), report_a.losses.last())
        );

        let mut b = Codec::new(cfg, 5, true, &Device::Cpu).unwrap();
        let report_b = train_codec(&mut b, &images, 30, 2, 1e-3, 9).unwrap();
        for (x, y) in report_a.losses.iter().zip(&report_b.losses) {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
        }
    }

    #[test]
    fn zero_steps_leaves_parameters_unchanged() {
        let mut codec = Codec::new(CodecConfig::default(), 2, true, &Device::Cpu).unwrap();
        let before: Vec<Vec<f32>> = codec
            .params
            .named_tensors()
            .values()
            .map(|t| t.flatten_all().unwrap().to_vec1::<f32>().unwrap())
            .collect();
        let img = Image::new(16, 16, 3);
        train_codec(&mut codec, &[img], 0, 1, 1e-3, 0).unwrap();
        let after: Vec<Vec<f32>> = codec
            .params
            .named_tensors()
            .values()
            .map(|t| t.flatten_all().unwrap().to_vec1::<f32>().unwrap())
            .collect();
        assert_eq!(before, after);
    }
}
