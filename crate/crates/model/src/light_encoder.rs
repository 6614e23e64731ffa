//! Plug-and-play light module: a transformer over canvas latents emitting
//! one condition tensor per backbone layer, plus the per-layer merge rule
//! `out = Linear(h + scale·c)` that injects them.
//!
//! Safe start: merge linears are identity-initialized and the per-layer
//! condition projections zero-initialized, so an untrained module is an
//! exact no-op on the backbone at any input — and at `scale = 0` the merge
//! stays a bit-exact identity forever.

use crate::dit::{attention, patchify_tokens, pos_embed_grid, DiTConfig};
use crate::error::{Error, Result};
use crate::params::{identity, init_normal, zeros, ParamMap};
use crate::tensor_util::{layer_norm, linear};
use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_LIGHT_SCALE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightEncoderConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub patch: usize,
    pub c_lat: usize,
    pub use_pos_embed: bool,
    pub guidance_scale_default: f64,
}

impl LightEncoderConfig {
    /// Layer- and width-matched configuration for a backbone.
    pub fn matching(backbone: &DiTConfig) -> Self {
        LightEncoderConfig {
            n_layers: backbone.n_layers,
            d_model: backbone.d_model,
            n_heads: backbone.n_heads,
            patch: backbone.patch,
            c_lat: backbone.c_lat,
            use_pos_embed: backbone.use_pos_embed,
            guidance_scale_default: DEFAULT_LIGHT_SCALE,
        }
    }

    pub fn check_pairing(&self, backbone: &DiTConfig) -> Result<()> {
        let ok = self.n_layers == backbone.n_layers
            && self.d_model == backbone.d_model
            && self.patch == backbone.patch
            && self.c_lat == backbone.c_lat;
        if !ok {
            return Err(Error::Incompatible(format!(
                "light module ({}x{}) does not match backbone ({}x{})",
                self.n_layers, self.d_model, backbone.n_layers, backbone.d_model
            )));
        }
        Ok(())
    }
}

/// Per-layer condition tensors, one per backbone layer, each `(n_tokens, d)`.
pub struct LightConditionSequence {
    pub per_layer: Vec<Tensor>,
}

/// Borrowed view handed to the backbone's forward pass.
pub struct LightInjection<'a> {
    pub conds: &'a [Tensor],
    pub merges: &'a LightModule,
    pub scale: f64,
}

pub struct LightModule {
    config: LightEncoderConfig,
    params: ParamMap,
    dtype: DType,
}

impl LightModule {
    pub fn new(config: LightEncoderConfig, seed: u64, trainable: bool, device: &Device) -> Result<Self> {
        Self::new_with_dtype(config, seed, trainable, device, DType::F32)
    }

    pub fn new_with_dtype(
        config: LightEncoderConfig,
        seed: u64,
        trainable: bool,
        device: &Device,
        dtype: DType,
    ) -> Result<Self> {
        if config.d_model % config.n_heads != 0 {
            return Err(Error::Invalid(format!(
                "d_model {} not divisible by n_heads {}",
                config.d_model, config.n_heads
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamMap::new_with_dtype(trainable, device, dtype);
        let d = config.d_model;
        let token_dim = config.c_lat * config.patch * config.patch;

        let lin = |p: &mut ParamMap, rng: &mut ChaCha8Rng, name: &str, d_out: usize, d_in: usize| -> Result<()> {
            p.insert(&format!("{name}.weight"), init_normal(rng, d_out * d_in, d_in), &[d_out, d_in])?;
            p.insert(&format!("{name}.bias"), zeros(d_out), &[d_out])
        };

        lin(&mut p, &mut rng, "patch_embed", d, token_dim)?;
        for l in 0..config.n_layers {
            lin(&mut p, &mut rng, &format!("layer{l}.attn.qkv"), 3 * d, d)?;
            lin(&mut p, &mut rng, &format!("layer{l}.attn.proj"), d, d)?;
            lin(&mut p, &mut rng, &format!("layer{l}.mlp.fc1"), 4 * d, d)?;
            lin(&mut p, &mut rng, &format!("layer{l}.mlp.fc2"), d, 4 * d)?;
            // zero-init condition heads: untrained conditions are all-zero
            p.insert(&format!("layer{l}.out.weight"), zeros(d * d), &[d, d])?;
            p.insert(&format!("layer{l}.out.bias"), zeros(d), &[d])?;
            // identity-init merges: scale=0 keeps the backbone untouched
            p.insert(&format!("merge{l}.weight"), identity(d), &[d, d])?;
            p.insert(&format!("merge{l}.bias"), zeros(d), &[d])?;
        }

        Ok(LightModule {
            config,
            params: p,
            dtype,
        })
    }

    pub fn config(&self) -> &LightEncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamMap {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamMap {
        &mut self.params
    }

    fn lin(&self, x: &Tensor, name: &str) -> Result<Tensor> {
        linear(
            x,
            self.params.get(&format!("{name}.weight"))?,
            self.params.get(&format!("{name}.bias"))?,
        )
    }

    /// Condition sequence from canvas latents `(F, C, H, W)`; one tensor
    /// per backbone layer, taken after that layer's encoder block.
    pub fn encode_light(&self, canvas_latents: &Tensor) -> Result<LightConditionSequence> {
        let z = canvas_latents.to_dtype(self.dtype)?;
        let (tokens, dims) = patchify_tokens(&z, self.config.patch, self.config.c_lat)?;
        let mut x = self.lin(&tokens, "patch_embed")?;
        if self.config.use_pos_embed {
            x = (x + pos_embed_grid(dims, self.config.d_model, self.params.device(), self.dtype)?)?;
        }
        let d = self.config.d_model;
        let mut per_layer = Vec::with_capacity(self.config.n_layers);
        for l in 0..self.config.n_layers {
            // 3D self-attention over all space-time canvas tokens
            let h = layer_norm(&x)?;
            let qkv = self.lin(&h, &format!("layer{l}.attn.qkv"))?;
            let q = qkv.narrow(1, 0, d)?;
            let k = qkv.narrow(1, d, d)?;
            let v = qkv.narrow(1, 2 * d, d)?;
            let a = attention(&q, &k, &v, self.config.n_heads)?;
            x = (x + self.lin(&a, &format!("layer{l}.attn.proj"))?)?;

            let h = candle_nn::ops::silu(&self.lin(&layer_norm(&x)?, &format!("layer{l}.mlp.fc1"))?)?;
            x = (x + self.lin(&h, &format!("layer{l}.mlp.fc2"))?)?;

            per_layer.push(self.lin(&x, &format!("layer{l}.out"))?);
        }
        Ok(LightConditionSequence { per_layer })
    }

    /// Merge rule for layer `l`: `Linear_l(h + scale·c)`.
    pub fn apply(&self, l: usize, h: &Tensor, c: &Tensor, scale: f64) -> Result<Tensor> {
        if h.dims() != c.dims() {
            return Err(Error::Incompatible(format!(
                "merge shapes {:?} vs {:?}",
                h.dims(),
                c.dims()
            )));
        }
        let mixed = (h + (c.to_dtype(self.dtype)? * scale)?)?;
        self.lin(&mixed, &format!("merge{l}"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::checkpoint::save(path, "light", &self.config, self.params.named_tensors())
    }

    pub fn load(path: &Path, trainable: bool, device: &Device) -> Result<Self> {
        let (config, tensors) =
            crate::checkpoint::load_as::<LightEncoderConfig>(path, "light", device)?;
        let mut module = LightModule::new(config, 0, trainable, device)?;
        module.params.load_from(&tensors)?;
        Ok(module)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ScheduleConfig;
    use crate::tensor_util::randn;

    fn tiny_backbone() -> DiTConfig {
        DiTConfig {
            n_layers: 3,
            d_model: 16,
            n_heads: 2,
            patch: 2,
            c_lat: 4,
            d_text: 64,
            n_text_tokens: 2,
            use_pos_embed: true,
            schedule: ScheduleConfig::default(),
        }
    }

    fn flat(t: &Tensor) -> Vec<f32> {
        t.to_dtype(DType::F32)
            .unwrap()
            .flatten_all()
            .unwrap()
            .to_vec1::<f32>()
            .unwrap()
    }

    #[test]
    fn condition_count_matches_layers_and_init_is_zero() {
        let cfg = LightEncoderConfig::matching(&tiny_backbone());
        let module = LightModule::new(cfg, 21, false, &Device::Cpu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = randn(&mut rng, &[2, 4, 8, 8], &Device::Cpu).unwrap();
        let conds = module.encode_light(&z).unwrap();
        assert_eq!(conds.per_layer.len(), 3);
        for c in &conds.per_layer {
            assert_eq!(c.dims(), &[2 * 4 * 4, 16]);
            assert!(flat(c).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn merge_scale_zero_is_bit_exact_identity() {
        let cfg = LightEncoderConfig::matching(&tiny_backbone());
        let module = LightModule::new(cfg, 2, false, &Device::Cpu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = randn(&mut rng, &[10, 16], &Device::Cpu).unwrap();
        let c = randn(&mut rng, &[10, 16], &Device::Cpu).unwrap();
        let out = module.apply(0, &h, &c, 0.0).unwrap();
        assert_eq!(flat(&out), flat(&h));
    }

    #[test]
    fn merge_is_affine_in_scale() {
        let cfg = LightEncoderConfig::matching(&tiny_backbone());
        let module = LightModule::new(cfg, 3, false, &Device::Cpu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = randn(&mut rng, &[6, 16], &Device::Cpu).unwrap();
        let c = randn(&mut rng, &[6, 16], &Device::Cpu).unwrap();
        let a = flat(&module.apply(1, &h, &c, 0.2).unwrap());
        let b = flat(&module.apply(1, &h, &c, 0.8).unwrap());
        let mid = flat(&module.apply(1, &h, &c, 0.5).unwrap());
        for i in 0..a.len() {
            assert!((a[i] + b[i] - 2.0 * mid[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn token_permutation_equivariance_without_pos_embed() {
        let mut backbone = tiny_backbone();
        backbone.use_pos_embed = false;
        backbone.patch = 1;
        let cfg = LightEncoderConfig::matching(&backbone);
        let mut module = LightModule::new(cfg, 5, false, &Device::Cpu).unwrap();
        // make condition heads nonzero so equivariance is observable
        let mut tensors = module.params.named_tensors().clone();
        for l in 0..3 {
            let name = format!("layer{l}.out.weight");
            let t = tensors[&name].clone();
            tensors.insert(name, (t.ones_like().unwrap() * 0.1).unwrap());
        }
        let cfg = LightEncoderConfig::matching(&backbone);
        let mut fresh = LightModule::new(cfg, 5, false, &Device::Cpu).unwrap();
        fresh.params.load_from(&tensors).unwrap();
        module = fresh;

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = randn(&mut rng, &[2, 4, 4, 4], &Device::Cpu).unwrap();
        let z_flip = z.flip(&[3]).unwrap();
        let a = module.encode_light(&z).unwrap();
        let b = module.encode_light(&z_flip).unwrap();
        for (ca, cb) in a.per_layer.iter().zip(&b.per_layer) {
            // mirroring x mirrors the token order within each row of the grid
            let ca = ca.reshape(&[2, 4, 4, 16]).unwrap().flip(&[2]).unwrap();
            let va = flat(&ca);
            let vb = flat(cb);
            for (x, y) in va.iter().zip(&vb) {
                assert!((x - y).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn pairing_mismatch_detected() {
        let backbone = tiny_backbone();
        let mut cfg = LightEncoderConfig::matching(&backbone);
        cfg.n_layers = 2;
        assert!(cfg.check_pairing(&backbone).is_err());
        assert!(LightEncoderConfig::matching(&backbone).check_pairing(&backbone).is_ok());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("light.ckpt");
        let cfg = LightEncoderConfig::matching(&tiny_backbone());
        let module = LightModule::new(cfg, 8, false, &Device::Cpu).unwrap();
        module.save(&path).unwrap();
        let loaded = LightModule::load(&path, false, &Device::Cpu).unwrap();
        assert_eq!(loaded.config, module.config);
        for (name, t) in module.params.named_tensors() {
            assert_eq!(flat(t), flat(&loaded.params.named_tensors()[name]));
        }
    }
}
