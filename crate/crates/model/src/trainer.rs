//! Dual-branch training: a light-injected trainable branch regularized
//! against a frozen weight-shared branch, optimizing
//! `L_total = L_denoise + beta * L_dis`.
//!
//! Only the light module's parameters are registered as variables; the
//! backbone and codec are frozen structurally (plain tensors), so their
//! gradients are identically zero by construction rather than by masking.

use crate::codec::Codec;
use crate::dit::{DiT, TextCond};
use crate::error::{Error, Result};
use crate::light_encoder::{LightInjection, LightModule};
use crate::schedule::Schedule;
use crate::tensor_util::{frames_to_tensor, randn, scalar_f64};
use candle_core::Tensor;
use candle_nn::Optimizer;
use lumiforge_core::dataset::{load_sample, DatasetManifest};
use lumiforge_core::image::Image;
use lumiforge_core::text::embed_text;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Z0Mode {
    /// `z0 = z_t - eps`, the paper's written form.
    Paper,
    /// Standard DDPM posterior mean `(z_t - sqrt(1-ab) eps) / sqrt(ab)`.
    AlphaWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub beta: f64,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub z0_mode: Z0Mode,
    pub enable_dis_loss: bool,
    pub enable_caption_aug: bool,
    pub light_scale: f64,
    pub cfg_dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: 3.0,
            lr: 1e-4,
            steps: 1500,
            batch: 2,
            seed: 0,
            z0_mode: Z0Mode::Paper,
            enable_dis_loss: true,
            enable_caption_aug: true,
            light_scale: crate::light_encoder::DEFAULT_LIGHT_SCALE,
            cfg_dropout: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta < 0.0 {
            return Err(Error::Invalid("beta must be >= 0".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Invalid("lr must be > 0".into()));
        }
        if self.batch == 0 {
            return Err(Error::Invalid("batch must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mean squared error over all elements.
pub fn denoise_loss(eps_hat: &Tensor, eps: &Tensor) -> Result<Tensor> {
    if eps_hat.dims() != eps.dims() {
        return Err(Error::Incompatible(format!(
            "denoise_loss shapes {:?} vs {:?}",
            eps_hat.dims(),
            eps.dims()
        )));
    }
    Ok((eps_hat - eps)?.sqr()?.mean_all()?)
}

/// Per-channel statistics over all space-time positions of `(F, C, H, W)`.
fn channel_stats(z: &Tensor) -> Result<(Tensor, Tensor)> {
    let (f, c, h, w) = z.dims4()?;
    let n = f * h * w;
    if n < 2 {
        return Err(Error::Invalid(format!(
            "sigma undefined over {n} position(s); need at least 2"
        )));
    }
    let flat = z.permute([1, 0, 2, 3])?.contiguous()?.reshape(&[c, n])?;
    let mu = flat.mean_keepdim(1)?;
    let var = flat.broadcast_sub(&mu)?.sqr()?.mean(1)?;
    // the tiny epsilon keeps sqrt differentiable at 0; it underflows to a
    // no-op for any normal f32 variance
    let sigma = (var + 1e-16)?.sqrt()?;
    Ok((mu.reshape(&[c])?, sigma))
}

/// Smooth L2 norm of a vector: exactly 0 for the zero vector, with finite
/// gradients there.
fn vec_norm(d: &Tensor) -> Result<Tensor> {
    let sum_sq = d.sqr()?.sum_all()?;
    let eps = 1e-16f64;
    Ok(((sum_sq + eps)?.sqrt()? - eps.sqrt())?)
}

/// AdaIN-style disentanglement loss:
/// `|sigma(z0_pred) - sigma(z0_reg)|_2 + |mu(z0_pred) - mu(z0_reg)|_2`,
/// statistics per channel over all space-time positions of one sample.
pub fn disentanglement_loss(z0_pred: &Tensor, z0_reg: &Tensor) -> Result<Tensor> {
    if z0_pred.dims() != z0_reg.dims() {
        return Err(Error::Incompatible(format!(
            "disentanglement_loss shapes {:?} vs {:?}",
            z0_pred.dims(),
            z0_reg.dims()
        )));
    }
    let (mu_p, sigma_p) = channel_stats(z0_pred)?;
    let (mu_r, sigma_r) = channel_stats(z0_reg)?;
    Ok((vec_norm(&(sigma_p - sigma_r)?)? + vec_norm(&(mu_p - mu_r)?)?)?)
}

fn z0_from(z_t: &Tensor, eps: &Tensor, t: usize, schedule: &Schedule, mode: Z0Mode) -> Result<Tensor> {
    match mode {
        Z0Mode::Paper => Ok((z_t - eps)?),
        Z0Mode::AlphaWeighted => {
            let ab = schedule.alpha_bar(t)?;
            Ok(((z_t - (eps * (1.0 - ab).sqrt())?)? / ab.sqrt())?)
        }
    }
}

/// Differentiable losses for one `(latent, canvas, caption, t, eps)` tuple.
/// Pure function of parameters and inputs; the gradient-correctness checks
/// re-evaluate it under parameter perturbations.
pub fn dual_branch_losses(
    backbone: &DiT,
    light: &LightModule,
    schedule: &Schedule,
    latent: &Tensor,
    canvas_latent: &Tensor,
    text: TextCond,
    t: usize,
    eps: &Tensor,
    config: &TrainConfig,
) -> Result<(Tensor, Tensor, Tensor)> {
    let latent = latent.to_dtype(backbone.dtype())?;
    let eps = &eps.to_dtype(backbone.dtype())?;
    let z_t = schedule.q_sample(&latent, t, eps)?;
    let conds = light.encode_light(canvas_latent)?;
    let injection = LightInjection {
        conds: &conds.per_layer,
        merges: light,
        scale: config.light_scale,
    };
    let eps_pred = backbone.forward(&z_t, t, text, Some(&injection))?;
    // the reference branch shares the frozen backbone weights and must not
    // feed gradients back into the controlled branch
    let eps_reg = backbone.forward(&z_t, t, text, None)?.detach();

    let z_t_d = z_t.detach();
    let z0_pred = z0_from(&z_t_d, &eps_pred, t, schedule, config.z0_mode)?;
    let z0_reg = z0_from(&z_t_d, &eps_reg, t, schedule, config.z0_mode)?;

    let l_denoise = denoise_loss(&eps_pred, &eps.to_dtype(eps_pred.dtype())?)?;
    let l_dis = disentanglement_loss(&z0_pred, &z0_reg)?;
    let total = if config.enable_dis_loss {
        (&l_denoise + (&l_dis * config.beta)?)?
    } else {
        l_denoise.clone()
    };
    Ok((total, l_denoise, l_dis))
}

/// One encoded dataset sample ready for training.
pub struct PreparedSample {
    pub sample_id: String,
    pub latent: Tensor,
    pub canvas_latent: Tensor,
    pub text: Vec<f32>,
    pub text_variants: Vec<Vec<f32>>,
}

/// Encodes every sample's frames and canvases once up front; training steps
/// then touch only latents.
pub fn prepare_samples(
    codec: &Codec,
    manifest: &DatasetManifest,
    root: &Path,
    d_text: usize,
) -> Result<Vec<PreparedSample>> {
    let mut out = Vec::with_capacity(manifest.samples.len());
    for entry in &manifest.samples {
        let sample = load_sample(manifest, root, &entry.sample_id)?;
        let latent = codec.encode_frames(&sample.frames)?.detach();
        let canvas_latent = codec.encode_frames(&sample.canvases)?.detach();
        out.push(PreparedSample {
            sample_id: entry.sample_id.clone(),
            latent,
            canvas_latent,
            text: embed_text(&sample.caption, d_text),
            text_variants: sample
                .caption_variants
                .iter()
                .map(|c| embed_text(c, d_text))
                .collect(),
        });
    }
    if out.is_empty() {
        return Err(Error::Invalid("dataset has no samples".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct LossRow {
    pub step: usize,
    pub total: f64,
    pub denoise: f64,
    pub dis: f64,
}

pub struct TrainReport {
    pub rows: Vec<LossRow>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,loss_total,loss_denoise,loss_dis\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.8},{:.8},{:.8}\n", r.step, r.total, r.denoise, r.dis));
        }
        s
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())
            .map_err(|e| lumiforge_core::Error::io(path, e).into())
    }
}

fn pick_text<'a>(
    sample: &'a PreparedSample,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> TextCond<'a> {
    if rng.gen_range(0.0..1.0) < config.cfg_dropout {
        return TextCond::Null;
    }
    if config.enable_caption_aug && !sample.text_variants.is_empty() {
        // base caption and variants drawn uniformly
        let i = rng.gen_range(0..=sample.text_variants.len());
        if i > 0 {
            return TextCond::Embedding(&sample.text_variants[i - 1]);
        }
    }
    TextCond::Embedding(&sample.text)
}

/// One optimizer update over a sampled batch. Updates only the light
/// module's parameters (the optimizer owns exactly those vars).
#[allow(clippy::too_many_arguments)]
pub fn dual_branch_step(
    backbone: &DiT,
    light: &LightModule,
    schedule: &Schedule,
    samples: &[PreparedSample],
    config: &TrainConfig,
    opt: &mut candle_nn::AdamW,
    rng: &mut ChaCha8Rng,
    step: usize,
) -> Result<LossRow> {
    let device = light.params().device().clone();
    let mut total_acc: Option<Tensor> = None;
    let mut denoise_acc = 0.0;
    let mut dis_acc = 0.0;
    for _ in 0..config.batch {
        let sample = &samples[rng.gen_range(0..samples.len())];
        let text = pick_text(sample, config, rng);
        let t = rng.gen_range(1..=schedule.t_train());
        let eps = randn(rng, sample.latent.dims(), &device)?;
        let (total, denoise, dis) = dual_branch_losses(
            backbone,
            light,
            schedule,
            &sample.latent,
            &sample.canvas_latent,
            text,
            t,
            &eps,
            config,
        )?;
        denoise_acc += scalar_f64(&denoise)?;
        dis_acc += scalar_f64(&dis)?;
        total_acc = Some(match total_acc {
            None => total,
            Some(acc) => (acc + total)?,
        });
    }
    let total = (total_acc.expect("batch >= 1") / config.batch as f64)?;
    let row = LossRow {
        step,
        total: scalar_f64(&total)?,
        denoise: denoise_acc / config.batch as f64,
        dis: dis_acc / config.batch as f64,
    };
    if !row.total.is_finite() {
        return Err(Error::NanLoss {
            step,
            detail: format!("denoise {} dis {}", row.denoise, row.dis),
        });
    }
    opt.backward_step(&total)?;
    Ok(row)
}

/// Full LumiSculpt training run; the light module must be trainable, the
/// codec and backbone frozen.
pub fn train(
    codec: &Codec,
    backbone: &DiT,
    light: &mut LightModule,
    manifest: &DatasetManifest,
    root: &Path,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    light.config().check_pairing(backbone.config())?;
    if !light.params().trainable() {
        return Err(Error::Invalid("light module is frozen".into()));
    }
    if backbone.params().trainable() || codec.params().trainable() {
        return Err(Error::Invalid("backbone and codec must be frozen".into()));
    }
    let schedule = Schedule::linear(backbone.config().schedule.clone())?;
    let samples = prepare_samples(codec, manifest, root, backbone.config().d_text)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = candle_nn::AdamW::new(
        light.params().var_list(),
        candle_nn::ParamsAdamW {
            lr: config.lr,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?;
    let mut rows = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        rows.push(dual_branch_step(
            backbone, light, &schedule, &samples, config, &mut opt, &mut rng, step,
        )?);
    }
    Ok(TrainReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneTrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub cfg_dropout: f64,
    /// Color-jittered copies per sample, standing in for the appearance
    /// diversity a pretrained backbone would have seen.
    pub jitter_variants: usize,
}

impl Default for BackboneTrainConfig {
    fn default() -> Self {
        BackboneTrainConfig {
            steps: 1000,
            batch: 2,
            lr: 1e-4,
            seed: 0,
            cfg_dropout: 0.1,
            jitter_variants: 2,
        }
    }
}

fn color_jitter(frames: &[Image], rng: &mut ChaCha8Rng) -> Vec<Image> {
    let gains: [f32; 3] = [
        rng.gen_range(0.7..1.3),
        rng.gen_range(0.7..1.3),
        rng.gen_range(0.7..1.3),
    ];
    frames
        .iter()
        .map(|f| {
            let mut out = f.clone();
            for y in 0..f.height() {
                for x in 0..f.width() {
                    for c in 0..f.channels() {
                        out.set(x, y, c, (f.get(x, y, c) * gains[c % 3]).clamp(0.0, 1.0));
                    }
                }
            }
            out
        })
        .collect()
}

/// Plain text-conditioned denoising warmup of the backbone (no light
/// module), the desk-scale stand-in for a pretrained video model.
pub fn train_backbone(
    codec: &Codec,
    backbone: &mut DiT,
    manifest: &DatasetManifest,
    root: &Path,
    config: &BackboneTrainConfig,
) -> Result<TrainReport> {
    if !backbone.params().trainable() {
        return Err(Error::Invalid("backbone is frozen".into()));
    }
    let schedule = Schedule::linear(backbone.config().schedule.clone())?;
    let device = backbone.params().device().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // precompute latents: base frames plus jittered variants
    let mut latents: Vec<(Tensor, Vec<f32>)> = Vec::new();
    for entry in &manifest.samples {
        let sample = load_sample(manifest, root, &entry.sample_id)?;
        let text = embed_text(&sample.caption, backbone.config().d_text);
        latents.push((codec.encode_frames(&sample.frames)?.detach(), text.clone()));
        for _ in 0..config.jitter_variants {
            let jittered = color_jitter(&sample.frames, &mut rng);
            let t = frames_to_tensor(&jittered, 3, &device)?;
            latents.push((codec.encode_mean(&t)?.detach(), text.clone()));
        }
    }
    if latents.is_empty() {
        return Err(Error::Invalid("dataset has no samples".into()));
    }

    let mut opt = candle_nn::AdamW::new(
        backbone.params().var_list(),
        candle_nn::ParamsAdamW {
            lr: config.lr,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?;
    let mut rows = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let mut acc: Option<Tensor> = None;
        for _ in 0..config.batch {
            let (latent, text) = &latents[rng.gen_range(0..latents.len())];
            let cond = if rng.gen_range(0.0..1.0) < config.cfg_dropout {
                TextCond::Null
            } else {
                TextCond::Embedding(text)
            };
            let t = rng.gen_range(1..=schedule.t_train());
            let eps = randn(&mut rng, latent.dims(), &device)?;
            let z_t = schedule.q_sample(latent, t, &eps)?;
            let eps_hat = backbone.forward(&z_t, t, cond, None)?;
            let loss = denoise_loss(&eps_hat, &eps)?;
            acc = Some(match acc {
                None => loss,
                Some(a) => (a + loss)?,
            });
        }
        let loss = (acc.expect("batch >= 1") / config.batch as f64)?;
        let value = scalar_f64(&loss)?;
        if !value.is_finite() {
            return Err(Error::NanLoss {
                step,
                detail: "backbone warmup".into(),
            });
        }
        opt.backward_step(&loss)?;
        rows.push(LossRow {
            step,
            total: value,
            denoise: value,
            dis: 0.0,
        });
    }
    Ok(TrainReport { rows })
}
