//! Text-conditioned video diffusion transformer with ε-prediction.
//!
//! Latents are patchified into space-time tokens; every block applies full
//! 3D self-attention over all tokens, cross-attention to a small set of text
//! context tokens, and timestep conditioning via adaLN scale/shift/gate
//! computed from a sinusoidal timestep embedding. Modulation and output head
//! are zero-initialized, so a fresh backbone predicts ε̂ = 0.
//!
//! The light module injects per-layer conditions after each block through
//! [`crate::light_encoder::LightInjection`]; with no injection the forward
//! pass is the plain backbone.

use crate::error::{Error, Result};
use crate::light_encoder::LightInjection;
use crate::params::{init_normal, zeros, ParamMap};
use crate::schedule::ScheduleConfig;
use crate::tensor_util::{layer_norm, linear};
use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiTConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub patch: usize,
    pub c_lat: usize,
    pub d_text: usize,
    pub n_text_tokens: usize,
    pub use_pos_embed: bool,
    pub schedule: ScheduleConfig,
}

impl Default for DiTConfig {
    fn default() -> Self {
        DiTConfig {
            n_layers: 6,
            d_model: 128,
            n_heads: 4,
            patch: 2,
            c_lat: 4,
            d_text: 64,
            n_text_tokens: 4,
            use_pos_embed: true,
            schedule: ScheduleConfig::default(),
        }
    }
}

impl DiTConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Invalid(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_layers == 0 || self.patch == 0 || self.n_text_tokens == 0 {
            return Err(Error::Invalid("n_layers, patch, n_text_tokens must be >= 1".into()));
        }
        Ok(())
    }

    pub fn token_dim(&self) -> usize {
        self.c_lat * self.patch * self.patch
    }
}

/// Text input to a forward pass; `Null` selects the learned
/// classifier-free-guidance vector.
#[derive(Clone, Copy)]
pub enum TextCond<'a> {
    Embedding(&'a [f32]),
    Null,
}

pub struct DiT {
    config: DiTConfig,
    params: ParamMap,
    dtype: DType,
}

fn linear_init(
    p: &mut ParamMap,
    rng: &mut ChaCha8Rng,
    name: &str,
    d_out: usize,
    d_in: usize,
) -> Result<()> {
    p.insert(&format!("{name}.weight"), init_normal(rng, d_out * d_in, d_in), &[d_out, d_in])?;
    p.insert(&format!("{name}.bias"), zeros(d_out), &[d_out])
}

fn linear_zero(p: &mut ParamMap, name: &str, d_out: usize, d_in: usize) -> Result<()> {
    p.insert(&format!("{name}.weight"), zeros(d_out * d_in), &[d_out, d_in])?;
    p.insert(&format!("{name}.bias"), zeros(d_out), &[d_out])
}

/// Sinusoidal embedding of a scalar position into `dim` floats.
pub(crate) fn sinusoidal(pos: f64, dim: usize) -> Vec<f32> {
    let half = dim / 2;
    let mut v = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half.max(1) as f64).exp();
        v.push((pos * freq).sin() as f32);
    }
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half.max(1) as f64).exp();
        v.push((pos * freq).cos() as f32);
    }
    if dim % 2 == 1 {
        v.push(0.0);
    }
    v
}

/// `(F*Hp*Wp, C*p*p)` tokens from an `(F, C, H, W)` latent; shared by the
/// backbone and the light encoder so their token grids align.
pub(crate) fn patchify_tokens(
    z: &Tensor,
    patch: usize,
    c_lat: usize,
) -> Result<(Tensor, (usize, usize, usize))> {
    let p = patch;
    let (f, c, h, w) = z.dims4()?;
    if c != c_lat {
        return Err(Error::Incompatible(format!(
            "latent channels {c} != config c_lat {c_lat}"
        )));
    }
    if h % p != 0 || w % p != 0 {
        return Err(Error::Incompatible(format!(
            "latent {h}x{w} not divisible by patch {p}"
        )));
    }
    let (hp, wp) = (h / p, w / p);
    let tokens = z
        .reshape(&[f, c, hp, p, wp, p])?
        .permute([0, 2, 4, 1, 3, 5])?
        .contiguous()?
        .reshape(&[f * hp * wp, c * p * p])?;
    Ok((tokens, (f, hp, wp)))
}

pub(crate) fn unpatchify_tokens(
    tokens: &Tensor,
    dims: (usize, usize, usize),
    patch: usize,
    c_lat: usize,
) -> Result<Tensor> {
    let p = patch;
    let (f, hp, wp) = dims;
    Ok(tokens
        .reshape(&[f, hp, wp, c_lat, p, p])?
        .permute([0, 3, 1, 4, 2, 5])?
        .contiguous()?
        .reshape(&[f, c_lat, hp * p, wp * p])?)
}

/// Sum of per-axis sinusoidal embeddings for a `(F, Hp, Wp)` token grid.
pub(crate) fn pos_embed_grid(
    dims: (usize, usize, usize),
    d: usize,
    device: &Device,
    dtype: DType,
) -> Result<Tensor> {
    let (f, hp, wp) = dims;
    let mut data = Vec::with_capacity(f * hp * wp * d);
    for fi in 0..f {
        let ef = sinusoidal(fi as f64, d);
        for yi in 0..hp {
            let ey = sinusoidal(yi as f64, d);
            for xi in 0..wp {
                let ex = sinusoidal(xi as f64, d);
                for i in 0..d {
                    data.push(ef[i] + ey[i] + ex[i]);
                }
            }
        }
    }
    Ok(Tensor::from_vec(data, &[f * hp * wp, d], device)?.to_dtype(dtype)?)
}

/// Multi-head attention of `q` over `(k, v)`; all are `(n, d)` token sets.
pub(crate) fn attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    n_heads: usize,
) -> Result<Tensor> {
    let (n_q, d) = q.dims2()?;
    let (n_kv, _) = k.dims2()?;
    let dh = d / n_heads;
    let split = |t: &Tensor, n: usize| -> Result<Tensor> {
        Ok(t.reshape(&[n, n_heads, dh])?.transpose(0, 1)?.contiguous()?)
    };
    let qh = split(q, n_q)?;
    let kh = split(k, n_kv)?;
    let vh = split(v, n_kv)?;
    let att = (qh.matmul(&kh.transpose(1, 2)?)? / (dh as f64).sqrt())?;
    let att = candle_nn::ops::softmax_last_dim(&att)?;
    let out = att.matmul(&vh)?;
    Ok(out.transpose(0, 1)?.contiguous()?.reshape(&[n_q, d])?)
}

impl DiT {
    pub fn new(config: DiTConfig, seed: u64, trainable: bool, device: &Device) -> Result<Self> {
        Self::new_with_dtype(config, seed, trainable, device, DType::F32)
    }

    pub fn new_with_dtype(
        config: DiTConfig,
        seed: u64,
        trainable: bool,
        device: &Device,
        dtype: DType,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamMap::new_with_dtype(trainable, device, dtype);
        let d = config.d_model;

        linear_init(&mut p, &mut rng, "patch_embed", d, config.token_dim())?;
        linear_init(&mut p, &mut rng, "t_embed.l1", d, d)?;
        linear_init(&mut p, &mut rng, "t_embed.l2", d, d)?;
        linear_init(&mut p, &mut rng, "text_proj", config.n_text_tokens * d, config.d_text)?;
        p.insert("null_text", init_normal(&mut rng, config.d_text, config.d_text), &[config.d_text])?;

        for l in 0..config.n_layers {
            // zero-init modulation: blocks start as the identity map
            linear_zero(&mut p, &format!("layer{l}.ada"), 7 * d, d)?;
            linear_init(&mut p, &mut rng, &format!("layer{l}.attn.qkv"), 3 * d, d)?;
            linear_init(&mut p, &mut rng, &format!("layer{l}.attn.proj"), d, d)?;
            linear_init(&mut p, &mut rng, &format!("layer{l}.cross.q"), d, d)?;
            linear_init(&mut p, &mut rng, &format!("layer{l}.cross.kv"), 2 * d, d)?;
            linear_init(&mut p, &mut rng, &format!("layer{l}.cross.proj"), d, d)?;
            linear_init(&mut p, &mut rng, &format!("layer{l}.mlp.fc1"), 4 * d, d)?;
            linear_init(&mut p, &mut rng, &format!("layer{l}.mlp.fc2"), d, 4 * d)?;
        }
        linear_zero(&mut p, "final.ada", 2 * d, d)?;
        linear_zero(&mut p, "head", config.token_dim(), d)?;

        Ok(DiT {
            config,
            params: p,
            dtype,
        })
    }

    pub fn config(&self) -> &DiTConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamMap {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamMap {
        &mut self.params
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    fn lin(&self, x: &Tensor, name: &str) -> Result<Tensor> {
        linear(
            x,
            self.params.get(&format!("{name}.weight"))?,
            self.params.get(&format!("{name}.bias"))?,
        )
    }

    fn patchify(&self, z: &Tensor) -> Result<(Tensor, (usize, usize, usize))> {
        patchify_tokens(z, self.config.patch, self.config.c_lat)
    }

    fn unpatchify(&self, tokens: &Tensor, dims: (usize, usize, usize)) -> Result<Tensor> {
        unpatchify_tokens(tokens, dims, self.config.patch, self.config.c_lat)
    }

    fn pos_embed(&self, dims: (usize, usize, usize)) -> Result<Tensor> {
        pos_embed_grid(dims, self.config.d_model, self.params.device(), self.dtype)
    }

    /// Timestep conditioning vector `(1, d_model)`.
    fn time_core(&self, t: usize) -> Result<Tensor> {
        let emb = sinusoidal(t as f64, self.config.d_model);
        let x = Tensor::from_vec(emb, &[1, self.config.d_model], self.params.device())?
            .to_dtype(self.dtype)?;
        let x = candle_nn::ops::silu(&self.lin(&x, "t_embed.l1")?)?;
        self.lin(&x, "t_embed.l2")
    }

    /// Text context tokens `(n_text_tokens, d_model)`.
    fn text_context(&self, text: TextCond) -> Result<Tensor> {
        let vec = match text {
            TextCond::Embedding(e) => {
                if e.len() != self.config.d_text {
                    return Err(Error::Incompatible(format!(
                        "text embedding dim {} != d_text {}",
                        e.len(),
                        self.config.d_text
                    )));
                }
                Tensor::from_vec(e.to_vec(), &[1, self.config.d_text], self.params.device())?
                    .to_dtype(self.dtype)?
            }
            TextCond::Null => self.params.get("null_text")?.reshape(&[1, self.config.d_text])?,
        };
        Ok(self
            .lin(&vec, "text_proj")?
            .reshape(&[self.config.n_text_tokens, self.config.d_model])?)
    }

    fn modulate(x: &Tensor, shift: &Tensor, scale: &Tensor) -> Result<Tensor> {
        Ok(x.broadcast_mul(&(scale + 1.0)?)?.broadcast_add(shift)?)
    }

    /// ε̂ for a single latent video. Pure in `(parameters, inputs)`.
    pub fn forward(
        &self,
        z_t: &Tensor,
        t: usize,
        text: TextCond,
        injection: Option<&LightInjection>,
    ) -> Result<Tensor> {
        if t == 0 || t > self.config.schedule.t_train {
            return Err(Error::TimestepOutOfRange {
                t,
                t_train: self.config.schedule.t_train,
            });
        }
        if let Some(inj) = injection {
            if inj.conds.len() != self.config.n_layers {
                return Err(Error::Incompatible(format!(
                    "{} light conditions for {} layers",
                    inj.conds.len(),
                    self.config.n_layers
                )));
            }
        }
        let z_t = z_t.to_dtype(self.dtype)?;
        let (tokens, dims) = self.patchify(&z_t)?;
        let mut x = self.lin(&tokens, "patch_embed")?;
        if self.config.use_pos_embed {
            x = (x + self.pos_embed(dims)?)?;
        }
        let t_core = self.time_core(t)?;
        let ctx = self.text_context(text)?;
        let ctx_k = &ctx;
        let d = self.config.d_model;

        for l in 0..self.config.n_layers {
            let m = self.lin(&candle_nn::ops::silu(&t_core)?, &format!("layer{l}.ada"))?;
            let chunk = |i: usize| -> Result<Tensor> { Ok(m.narrow(1, i * d, d)?) };
            let (shift_sa, scale_sa, gate_sa) = (chunk(0)?, chunk(1)?, chunk(2)?);
            let gate_ca = chunk(3)?;
            let (shift_mlp, scale_mlp, gate_mlp) = (chunk(4)?, chunk(5)?, chunk(6)?);

            // 3D self-attention over all space-time tokens
            let h = Self::modulate(&layer_norm(&x)?, &shift_sa, &scale_sa)?;
            let qkv = self.lin(&h, &format!("layer{l}.attn.qkv"))?;
            let q = qkv.narrow(1, 0, d)?;
            let k = qkv.narrow(1, d, d)?;
            let v = qkv.narrow(1, 2 * d, d)?;
            let a = attention(&q, &k, &v, self.config.n_heads)?;
            let a = self.lin(&a, &format!("layer{l}.attn.proj"))?;
            x = (x + a.broadcast_mul(&gate_sa)?)?;

            // cross-attention to the text context
            let h = layer_norm(&x)?;
            let q = self.lin(&h, &format!("layer{l}.cross.q"))?;
            let kv = self.lin(ctx_k, &format!("layer{l}.cross.kv"))?;
            let k = kv.narrow(1, 0, d)?;
            let v = kv.narrow(1, d, d)?;
            let ca = attention(&q, &k, &v, self.config.n_heads)?;
            let ca = self.lin(&ca, &format!("layer{l}.cross.proj"))?;
            x = (x + ca.broadcast_mul(&gate_ca)?)?;

            // mlp
            let h = Self::modulate(&layer_norm(&x)?, &shift_mlp, &scale_mlp)?;
            let h = candle_nn::ops::silu(&self.lin(&h, &format!("layer{l}.mlp.fc1"))?)?;
            let h = self.lin(&h, &format!("layer{l}.mlp.fc2"))?;
            x = (x + h.broadcast_mul(&gate_mlp)?)?;

            if let Some(inj) = injection {
                x = inj.merges.apply(l, &x, &inj.conds[l], inj.scale)?;
            }
        }

        let m = self.lin(&candle_nn::ops::silu(&t_core)?, "final.ada")?;
        let shift = m.narrow(1, 0, d)?;
        let scale = m.narrow(1, d, d)?;
        let x = Self::modulate(&layer_norm(&x)?, &shift, &scale)?;
        let out = self.lin(&x, "head")?;
        self.unpatchify(&out, dims)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::checkpoint::save(path, "dit", &self.config, self.params.named_tensors())
    }

    pub fn load(path: &Path, trainable: bool, device: &Device) -> Result<Self> {
        let (config, tensors) = crate::checkpoint::load_as::<DiTConfig>(path, "dit", device)?;
        let mut dit = DiT::new(config, 0, trainable, device)?;
        dit.params.load_from(&tensors)?;
        Ok(dit)
    }
}
