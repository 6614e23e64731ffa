//! Scratch: per-timestep validation loss + partial-noise DDIM reconstruction.

use candle_core::Device;
use lumiforge_core::dataset::DatasetManifest;
use lumiforge_core::image::Image;
use lumiforge_model::codec::Codec;
use lumiforge_model::dit::{DiT, TextCond};
use lumiforge_model::sampler::{sample_latent, SampleConfig};
use lumiforge_model::schedule::Schedule;
use lumiforge_model::tensor_util::randn;
use lumiforge_model::trainer::prepare_samples;
use rand::SeedableRng;
use std::path::PathBuf;

fn strip(frames: &[Image], take: usize) -> Image {
    let step = frames.len() / take;
    let w = frames[0].width();
    let h = frames[0].height();
    let c = frames[0].channels();
    let mut out = Image::new(w * take, h, c);
    for s in 0..take {
        let f = &frames[s * step];
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    out.set(s * w + x, y, ch, f.get(x, y, ch));
                }
            }
        }
    }
    out
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from("/tmp/diagfix");
    let dev = Device::Cpu;
    let (manifest, data_root) = DatasetManifest::load(&root.join("data/manifest.json"))?;
    let codec = Codec::load(&root.join("codec.ckpt"), false, &dev)?;
    let backbone = DiT::load(&root.join("dit_v6.ckpt"), false, &dev)?;
    let schedule = Schedule::linear(backbone.config().schedule.clone())?;
    let samples = prepare_samples(&codec, &manifest, &data_root, backbone.config().d_text)?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    // per-t bare validation loss; also x0-space error
    for t in [25usize, 50, 100, 200, 300, 400, 500, 600, 700, 800, 900, 950, 990] {
        let mut eps_l = 0f64;
        let mut x0_l = 0f64;
        for s in &samples {
            let eps = randn(&mut rng, s.latent.dims(), &dev)?;
            let z_t = schedule.q_sample(&s.latent, t, &eps)?;
            let pred = backbone.forward(&z_t, t, TextCond::Embedding(&s.text), None)?;
            eps_l += (&pred - &eps)?.sqr()?.mean_all()?.to_scalar::<f32>()? as f64;
            let ab = schedule.alpha_bar(t)?;
            let x0 = ((&z_t - (&pred * (1.0 - ab).sqrt())?)? / ab.sqrt())?;
            x0_l += (&x0 - &s.latent)?.sqr()?.mean_all()?.to_scalar::<f32>()? as f64;
        }
        let n = samples.len() as f64;
        eprintln!("[t={t}] eps mse {:.4}  x0 mse {:.4}", eps_l / n, x0_l / n);
    }

    // full sampling at different w / t_infer, seed 101, caption of s000_t01
    let s = &samples[1];
    let entry = manifest.sample("s000_t01")?;
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(
        data_root.join(&entry.frames_dir).join("metadata.json"),
    )?)?;
    let caption = meta["caption"]["text"].as_str().unwrap().to_string();
    let shape = s.latent.dims().to_vec();
    for (tag, t_infer, w) in [("w1_t50", 50usize, 1.0f64), ("w2_t100", 100, 2.0), ("w1_t200", 200, 1.0)] {
        let sc = SampleConfig {
            t_infer,
            w,
            light_scale: 0.0,
            seed: 101,
            n_frames: 16,
            resolution: 64,
        };
        let lat = sample_latent(&backbone, None, &caption, &sc, &shape)?;
        let std = lat.sqr()?.mean_all()?.to_scalar::<f32>()?.sqrt();
        let frames = codec.decode_to_frames(&lat)?;
        strip(&frames, 6).save_png(&PathBuf::from(format!("/tmp/diag9_{tag}.png")))?;
        eprintln!("[sample {tag}] latent rms {std:.3}");
    }
    Ok(())
}
