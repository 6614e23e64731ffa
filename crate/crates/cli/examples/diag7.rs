//! Scratch: v4 regime — long backbone warmup, capped light training at
//! light_scale 1.0, then a faithful criterion-7/8 simulation.

use candle_core::Device;
use lumiforge_cli::commands::train;
use lumiforge_cli::config::{BackboneSection, RunConfig};
use lumiforge_core::dataset::{load_sample, DatasetManifest, TrainingSample};
use lumiforge_core::caption::{augment_caption, Caption};
use lumiforge_core::image::Image;
use lumiforge_core::metrics::{brightness_consistency, direction_rmse};
use lumiforge_model::codec::Codec;
use lumiforge_model::dit::{DiT, DiTConfig};
use lumiforge_model::light_encoder::LightModule;
use lumiforge_model::sampler::{sample, SampleConfig};
use lumiforge_model::schedule::ScheduleConfig;
use std::path::{Path, PathBuf};

fn fixture_config() -> RunConfig {
    let mut config = RunConfig::default();
    config.codec.training.steps = 600;
    config.codec.training.batch = 8;
    config.codec.training.lr = 1e-3;
    config.backbone = BackboneSection::default();
    config.backbone.model = DiTConfig {
        n_layers: 3,
        d_model: 64,
        n_heads: 4,
        patch: 4,
        c_lat: 4,
        d_text: 32,
        n_text_tokens: 2,
        use_pos_embed: true,
        schedule: ScheduleConfig::default(),
    };
    config.backbone.training.steps = 10000;
    config.backbone.training.batch = 8;
    config.backbone.training.lr = 3e-4;
    config.backbone.training.seed = 1;
    config.backbone.training.jitter_variants = 1;
    config.train.steps = 2000;
    config.train.batch = 32;
    config.train.lr = 1e-3;
    config.train.seed = 2;
    config.sample.t_infer = 50;
    config.sample.w = 2.0;
    config.sample.light_scale = 0.5;
    config
}

fn held_out_variant(root: &Path, entry_dir: &str, training: &[String]) -> Option<String> {
    let meta_path = root.join(entry_dir).join("metadata.json");
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&meta_path).ok()?).ok()?;
    let base: Caption = serde_json::from_value(meta["caption"].clone()).ok()?;
    let pool = augment_caption(&base, 12, 0xB0A7).ok()?;
    pool.into_iter()
        .map(|c| c.text)
        .find(|t| *t != base.text && !training.contains(t))
}

struct EvalCase {
    caption: String,
    sample: TrainingSample,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from("/tmp/diagfix");
    let dev = Device::Cpu;
    let config = fixture_config();
    let manifest_path = root.join("data/manifest.json");
    if !manifest_path.exists() {
        eprintln!("[diag7] building dataset ...");
        lumiforge_cli::commands::dataset::generate_dataset(&config, &root.join("data"))?;
    }
    let (manifest, data_root) = DatasetManifest::load(&manifest_path)?;
    let codec_path = root.join("codec.ckpt");
    if !codec_path.exists() {
        eprintln!("[diag7] training codec ...");
        train::run_train_codec(&config, &manifest_path, &codec_path)?;
    }

    let backbone_path = root.join("dit_v5.ckpt");
    if !backbone_path.exists() {
        eprintln!("[diag7] backbone warmup 10000x8 ...");
        let s = train::run_train_backbone(
            &config,
            &manifest_path,
            &codec_path,
            &backbone_path,
            Some(&root.join("backbone_losses_v5.csv")),
        )?;
        eprintln!("[diag7] backbone final loss {:?}", s.final_loss);
    }
    let light_path = root.join("light_full_v5.ckpt");
    if !light_path.exists() {
        eprintln!("[diag7] light training 2000x32 scale=0.5 ...");
        let s = train::run_train_light(
            &config,
            &manifest_path,
            &codec_path,
            &backbone_path,
            &light_path,
            Some(&root.join("light_losses_v5.csv")),
            false,
            false,
        )?;
        eprintln!("[diag7] light final loss {:?}", s.final_loss);
    }

    let codec = Codec::load(&codec_path, false, &dev)?;
    let backbone = DiT::load(&backbone_path, false, &dev)?;
    let light = LightModule::load(&light_path, false, &dev)?;

    // criterion-7 simulation: 4 cases, held-out captions, scale 1 vs 0
    let ids = ["s000_t00", "s000_t01", "s001_t02", "s001_t03"];
    let mut cases = Vec::new();
    for id in ids {
        let entry = manifest.sample(id)?;
        let s = load_sample(&manifest, &data_root, id)?;
        let caption = held_out_variant(&data_root, &entry.frames_dir, &s.caption_variants)
            .ok_or("no held-out variant")?;
        cases.push(EvalCase { caption, sample: s });
    }
    let gen = |case: &EvalCase, scale: f64, seed: u64| -> Result<Vec<Image>, Box<dyn std::error::Error>> {
        let sc = SampleConfig {
            light_scale: scale,
            seed,
            ..config.sample.clone()
        };
        Ok(sample(&backbone, &codec, Some(&light), &case.caption, &case.sample.canvases, &sc)?)
    };
    let mut rmse = [0f64; 3];
    let mut bri = [0f64; 3];
    for (i, case) in cases.iter().enumerate() {
        for (slot, scale) in [(0usize, 0.5f64), (1, 1.0), (2, 0.0)] {
            let frames = gen(case, scale, 100 + i as u64)?;
            let r = direction_rmse(&frames, &case.sample.canvases)? as f64;
            let b = brightness_consistency(&frames, &case.sample.frames)? as f64;
            eprintln!("[c7 case {i}] scale {scale}: rmse {r:.4} brightness {b:.4}");
            rmse[slot] += r;
            bri[slot] += b;
        }
    }
    let n = cases.len() as f64;
    eprintln!(
        "[c7] ctrl@0.5 {:.4} ctrl@1.0 {:.4} vs base {:.4} (need <= {:.4}); bri {:.4}/{:.4} vs {:.4}",
        rmse[0] / n,
        rmse[1] / n,
        rmse[2] / n,
        0.7 * rmse[2] / n,
        bri[0] / n,
        bri[1] / n,
        bri[2] / n
    );

    // criterion-8-style sweep on case 0+1, seeds fixed
    for scale in [0.1f64, 0.3, 0.5, 0.7, 0.9] {
        let mut acc = 0.0;
        for (i, case) in cases.iter().take(2).enumerate() {
            let frames = gen(case, scale, 300 + i as u64)?;
            acc += direction_rmse(&frames, &case.sample.canvases)? as f64;
        }
        eprintln!("[c8] scale {scale}: mean rmse {:.4}", acc / 2.0);
    }
    Ok(())
}
