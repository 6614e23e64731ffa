//! Scratch: are canvas latents informative and does the light path see them?

use candle_core::Device;
use lumiforge_core::dataset::{load_sample, DatasetManifest};
use lumiforge_model::codec::Codec;
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from("/tmp/diagfix");
    let dev = Device::Cpu;
    let (manifest, data_root) = DatasetManifest::load(&root.join("data/manifest.json"))?;
    let codec = Codec::load(&root.join("codec.ckpt"), false, &dev)?;

    let ids = ["s000_t00", "s000_t01", "s001_t02", "s001_t03"];
    let mut lats = Vec::new();
    for id in ids {
        let s = load_sample(&manifest, &data_root, id)?;
        // canvas pixel stats
        let mut mx = 0f32;
        let mut sum = 0f64;
        let mut n = 0usize;
        for f in &s.canvases {
            for v in f.data() {
                mx = mx.max(*v);
                sum += *v as f64;
                n += 1;
            }
        }
        let z = codec.encode_frames(&s.canvases)?;
        let v: Vec<f32> = z.flatten_all()?.to_vec1()?;
        let m = v.iter().map(|x| *x as f64).sum::<f64>() / v.len() as f64;
        let sq = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>() / v.len() as f64;
        eprintln!(
            "[canvas {id}] n_ch {} pix mean {:.4} max {mx:.4}; latent mean {m:.4} std {:.4}",
            s.canvases[0].channels(),
            sum / n as f64,
            (sq - m * m).sqrt()
        );
        lats.push(z);
    }
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            let d = (&lats[i] - &lats[j])?.sqr()?.mean_all()?.to_scalar::<f32>()?;
            eprintln!("[canvas dist] {} vs {}: latent mse {d:.4}", ids[i], ids[j]);
        }
    }
    // per-frame variation within one trajectory (does the latent move over time?)
    {
        let z = &lats[0];
        let f0 = z.narrow(0, 0, 1)?;
        let f8 = z.narrow(0, 8, 1)?;
        let d = (&f0 - &f8)?.sqr()?.mean_all()?.to_scalar::<f32>()?;
        eprintln!("[canvas t00] frame0-vs-frame8 latent mse {d:.4}");
    }
    Ok(())
}
