//! Scratch: fixed-grid validation denoise loss, backbone vs light-conditioned.

use candle_core::Device;
use lumiforge_core::dataset::DatasetManifest;
use lumiforge_model::codec::Codec;
use lumiforge_model::dit::{DiT, TextCond};
use lumiforge_model::light_encoder::{LightInjection, LightModule};
use lumiforge_model::schedule::Schedule;
use lumiforge_model::tensor_util::randn;
use lumiforge_model::trainer::prepare_samples;
use rand::SeedableRng;
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from("/tmp/diagfix");
    let dev = Device::Cpu;
    let (manifest, data_root) = DatasetManifest::load(&root.join("data/manifest.json"))?;
    let codec = Codec::load(&root.join("codec.ckpt"), false, &dev)?;
    let backbone = DiT::load(&root.join("dit_v4.ckpt"), false, &dev)?;
    let light = LightModule::load(&root.join("light_full_v4.ckpt"), false, &dev)?;
    let schedule = Schedule::linear(backbone.config().schedule.clone())?;
    let samples = prepare_samples(&codec, &manifest, &data_root, backbone.config().d_text)?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for t in [200usize, 400, 600, 800] {
        let mut none_acc = 0f64;
        let mut half_acc = 0f64;
        let mut full_acc = 0f64;
        for s in &samples {
            let eps = randn(&mut rng, s.latent.dims(), &dev)?;
            let z_t = schedule.q_sample(&s.latent, t, &eps)?;
            let text = TextCond::Embedding(&s.text);
            let conds = light.encode_light(&s.canvas_latent)?;
            for (scale, acc) in [(0.0f64, &mut none_acc), (0.5, &mut half_acc), (1.0, &mut full_acc)] {
                let inj = LightInjection {
                    conds: &conds.per_layer,
                    merges: &light,
                    scale,
                };
                let pred = backbone.forward(&z_t, t, text, Some(&inj))?;
                *acc += (&pred - &eps)?.sqr()?.mean_all()?.to_scalar::<f32>()? as f64;
            }
        }
        let n = samples.len() as f64;
        // bare backbone (no merges at all)
        let mut bare = 0f64;
        for s in &samples {
            let eps = randn(&mut rng, s.latent.dims(), &dev)?;
            let z_t = schedule.q_sample(&s.latent, t, &eps)?;
            let pred = backbone.forward(&z_t, t, TextCond::Embedding(&s.text), None)?;
            bare += (&pred - &eps)?.sqr()?.mean_all()?.to_scalar::<f32>()? as f64;
        }
        eprintln!(
            "[val t={t}] bare {:.4} | merged scale0 {:.4} scale0.5 {:.4} scale1 {:.4}",
            bare / n,
            none_acc / n,
            half_acc / n,
            full_acc / n
        );
    }
    Ok(())
}
