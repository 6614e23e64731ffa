//! Scratch: can the light branch overfit a single video? Uses cached
//! codec/backbone from /tmp/diagfix.

use candle_core::Device;
use candle_nn::Optimizer;
use lumiforge_core::dataset::{load_sample, DatasetManifest};
use lumiforge_model::codec::Codec;
use lumiforge_model::dit::{DiT, TextCond};
use lumiforge_model::light_encoder::{LightEncoderConfig, LightModule};
use lumiforge_model::schedule::Schedule;
use lumiforge_model::tensor_util::randn;
use lumiforge_model::trainer::{dual_branch_losses, TrainConfig};
use rand::{Rng, SeedableRng};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from("/tmp/diagfix");
    let dev = Device::Cpu;
    let (manifest, data_root) = DatasetManifest::load(&root.join("data/manifest.json"))?;
    let codec = Codec::load(&root.join("codec.ckpt"), false, &dev)?;
    let backbone = DiT::load(&root.join("dit_v2.ckpt"), false, &dev)?;
    let schedule = Schedule::linear(backbone.config().schedule.clone())?;

    let s = load_sample(&manifest, &data_root, "s000_t00")?;
    let latent = codec.encode_frames(&s.frames)?.detach();
    let canvas_latent = codec.encode_frames(&s.canvases)?.detach();

    let mut tcfg = TrainConfig::default();
    tcfg.lr = std::env::var("LR").map(|v| v.parse().unwrap()).unwrap_or(1e-3);
    tcfg.enable_dis_loss = false; // isolate the denoise pathway

    let light = LightModule::new(
        LightEncoderConfig::matching(backbone.config()),
        0,
        true,
        &dev,
    )?;
    let mut opt = candle_nn::AdamW::new(
        light.params().var_list(),
        candle_nn::ParamsAdamW {
            lr: tcfg.lr,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let batch = 4usize;
    for step in 0..400 {
        let mut total: Option<candle_core::Tensor> = None;
        let mut dn = 0.0;
        for _ in 0..batch {
            let t = rng.gen_range(300..=500usize);
            let eps = randn(&mut rng, latent.dims(), &dev)?;
            let (tot, d, _) = dual_branch_losses(
                &backbone,
                &light,
                &schedule,
                &latent,
                &canvas_latent,
                TextCond::Null,
                t,
                &eps,
                &tcfg,
            )?;
            dn += d.to_scalar::<f32>()? as f64;
            total = Some(match total {
                None => tot,
                Some(a) => (a + tot)?,
            });
        }
        opt.backward_step(&(total.unwrap() / batch as f64)?)?;
        if step % 20 == 0 {
            // condition magnitude
            let conds = light.encode_light(&canvas_latent)?;
            let c0: f32 = conds.per_layer[0].sqr()?.mean_all()?.to_scalar()?;
            let c2: f32 = conds.per_layer[2].sqr()?.mean_all()?.to_scalar()?;
            eprintln!("[overfit] step {step}: denoise {:.4} |c0|^2 {c0:.5} |c2|^2 {c2:.5}", dn / batch as f64);
        }
    }
    Ok(())
}
