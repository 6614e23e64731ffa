//! Scratch: dump generated frames vs ground truth as PNG strips.

use candle_core::Device;
use lumiforge_core::dataset::{load_sample, DatasetManifest};
use lumiforge_core::image::Image;
use lumiforge_core::metrics::estimate_direction;
use lumiforge_model::codec::Codec;
use lumiforge_model::dit::DiT;
use lumiforge_model::light_encoder::LightModule;
use lumiforge_model::sampler::{sample, SampleConfig};
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
    let backbone = DiT::load(&root.join("dit_v5.ckpt"), false, &dev)?;
    let light = LightModule::load(&root.join("light_full_v5.ckpt"), false, &dev)?;

    let id = "s000_t01";
    let s = load_sample(&manifest, &data_root, id)?;
    let entry = manifest.sample(id)?;
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(
        data_root.join(&entry.frames_dir).join("metadata.json"),
    )?)?;
    let caption = meta["caption"]["text"].as_str().unwrap().to_string();

    strip(&s.frames, 6).save_png(&PathBuf::from("/tmp/strip_gt.png"))?;
    strip(&s.canvases, 6).save_png(&PathBuf::from("/tmp/strip_canvas.png"))?;

    for (tag, scale) in [("s0", 0.0f64), ("s1", 1.0)] {
        let sc = SampleConfig {
            t_infer: 50,
            w: 2.0,
            light_scale: scale,
            seed: 101,
            n_frames: 16,
            resolution: 64,
        };
        let frames = sample(&backbone, &codec, Some(&light), &caption, &s.canvases, &sc)?;
        strip(&frames, 6).save_png(&PathBuf::from(format!("/tmp/strip_gen_{tag}.png")))?;
        for i in [0usize, 5, 10, 15] {
            eprintln!(
                "[dir {tag}] frame {i}: gen {:?} gt {:?} canvas {:?}",
                estimate_direction(&frames[i]),
                estimate_direction(&s.frames[i]),
                estimate_direction(&s.canvases[i])
            );
        }
    }
    Ok(())
}
