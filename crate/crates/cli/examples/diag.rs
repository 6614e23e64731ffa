//! Scratch diagnostics for the trained acceptance fixture. Caches each stage
//! in /tmp/diagfix so iterations are cheap. Not part of the deliverable.

use candle_core::Device;
use lumiforge_cli::commands::{dataset, train};
use lumiforge_cli::config::{BackboneSection, RunConfig};
use lumiforge_core::dataset::{load_sample, DatasetManifest};
use lumiforge_core::image::Image;
use lumiforge_core::metrics::{brightness_consistency, direction_rmse, estimate_direction};
use lumiforge_model::codec::Codec;
use lumiforge_model::dit::DiTConfig;
use lumiforge_model::schedule::ScheduleConfig;
use lumiforge_model::light_encoder::LightModule;
use lumiforge_model::sampler::sample;
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
    config.backbone.training.steps = 2000;
    config.backbone.training.batch = 4;
    config.backbone.training.lr = 3e-4;
    config.backbone.training.seed = 1;
    config.backbone.training.jitter_variants = 1;
    config.train.steps = 2000;
    config.train.batch = 4;
    config.train.lr = 6e-4;
    config.train.cfg_dropout = 0.2;
    config.train.seed = 2;
    config.sample.t_infer = 20;
    config.sample.w = 2.0;
    config
}

fn stats(frames: &[Image]) -> (f32, f32) {
    let mut n = 0usize;
    let mut sum = 0f64;
    let mut sq = 0f64;
    for f in frames {
        for v in f.data() {
            sum += *v as f64;
            sq += (*v as f64) * (*v as f64);
            n += 1;
        }
    }
    let mean = sum / n as f64;
    ((mean) as f32, ((sq / n as f64 - mean * mean).max(0.0)).sqrt() as f32)
}

fn pixel_l1(a: &[Image], b: &[Image]) -> f32 {
    let mut n = 0usize;
    let mut sum = 0f64;
    for (x, y) in a.iter().zip(b) {
        for (p, q) in x.data().iter().zip(y.data()) {
            sum += (p - q).abs() as f64;
            n += 1;
        }
    }
    (sum / n as f64) as f32
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from("/tmp/diagfix");
    std::fs::create_dir_all(&root)?;
    let config = fixture_config();
    let dev = Device::Cpu;

    let manifest_path = root.join("data/manifest.json");
    if !manifest_path.exists() {
        eprintln!("[diag] building dataset ...");
        dataset::generate_dataset(&config, &root.join("data"))?;
    }
    let (manifest, data_root) = DatasetManifest::load(&manifest_path)?;

    // ---- metric floor on ground truth --------------------------------
    for id in ["s000_t00", "s000_t01", "s001_t02", "s001_t03"] {
        let s = load_sample(&manifest, &data_root, id)?;
        let floor = direction_rmse(&s.frames, &s.canvases)?;
        let self_b = brightness_consistency(&s.frames, &s.frames)?;
        // direction agreement frame 0 / mid frame
        let d_f0 = estimate_direction(&s.frames[0]);
        let d_c0 = estimate_direction(&s.canvases[0]);
        let d_f8 = estimate_direction(&s.frames[8]);
        let d_c8 = estimate_direction(&s.canvases[8]);
        eprintln!(
            "[floor] {id}: gt-vs-canvas rmse {floor:.4} (self brightness {self_b:.4}) \
             f0 {d_f0:?} c0 {d_c0:?} | f8 {d_f8:?} c8 {d_c8:?}"
        );
    }

    // cross-trajectory rmse: frames of t00 vs canvases of t01 (how separable
    // are the trajectories under this metric?)
    {
        let a = load_sample(&manifest, &data_root, "s000_t00")?;
        let b = load_sample(&manifest, &data_root, "s000_t01")?;
        let cross = direction_rmse(&a.frames, &b.canvases)?;
        eprintln!("[floor] cross-trajectory rmse (t00 frames vs t01 canvases): {cross:.4}");
    }

    // ---- checkpoints (cached) ----------------------------------------
    let codec_path = root.join("codec.ckpt");
    if !codec_path.exists() {
        eprintln!("[diag] training codec ...");
        let s = train::run_train_codec(&config, &manifest_path, &codec_path)?;
        eprintln!("[diag] codec final loss {:?}", s.final_loss);
    }
    let backbone_path = root.join("dit_v2.ckpt");
    if !backbone_path.exists() {
        eprintln!("[diag] backbone warmup ...");
        let s = train::run_train_backbone(
            &config,
            &manifest_path,
            &codec_path,
            &backbone_path,
            Some(&root.join("backbone_losses_v2.csv")),
        )?;
        eprintln!("[diag] backbone final loss {:?}", s.final_loss);
    }
    let codec = Codec::load(&codec_path, false, &dev)?;
    let backbone = lumiforge_model::dit::DiT::load(&backbone_path, false, &dev)?;

    // ---- v3: custom light training with mid-range t sampling ----------
    let light_path = root.join("light_full_v3.ckpt");
    if !light_path.exists() {
        use lumiforge_model::dit::TextCond;
        use lumiforge_model::light_encoder::LightEncoderConfig;
        use lumiforge_model::schedule::Schedule;
        use lumiforge_model::tensor_util::randn;
        use lumiforge_model::trainer::{dual_branch_losses, prepare_samples};
        use candle_nn::Optimizer;
        use rand::{Rng, SeedableRng};
        eprintln!("[diag] v3 light training (mid-t, batch 8) ...");
        let schedule = Schedule::linear(backbone.config().schedule.clone())?;
        let samples = prepare_samples(&codec, &manifest, &data_root, backbone.config().d_text)?;
        let mut tcfg = config.train.clone();
        tcfg.lr = 1e-3;
        let light_mut = LightModule::new(
            LightEncoderConfig::matching(backbone.config()),
            tcfg.seed,
            true,
            &dev,
        )?;
        let mut opt = candle_nn::AdamW::new(
            light_mut.params().var_list(),
            candle_nn::ParamsAdamW {
                lr: tcfg.lr,
                weight_decay: 0.0,
                ..Default::default()
            },
        )?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(tcfg.seed);
        let steps = 2000usize;
        let batch = 8usize;
        for step in 0..steps {
            let mut total: Option<candle_core::Tensor> = None;
            let mut dn = 0.0;
            let mut ds = 0.0;
            for _ in 0..batch {
                let s = &samples[rng.gen_range(0..samples.len())];
                let text = if rng.gen_range(0.0..1.0) < 0.15 {
                    TextCond::Null
                } else {
                    TextCond::Embedding(&s.text)
                };
                let t = rng.gen_range(50..=700usize);
                let eps = randn(&mut rng, s.latent.dims(), &dev)?;
                let (tot, d, di) = dual_branch_losses(
                    &backbone,
                    &light_mut,
                    &schedule,
                    &s.latent,
                    &s.canvas_latent,
                    text,
                    t,
                    &eps,
                    &tcfg,
                )?;
                dn += d.to_scalar::<f32>()? as f64;
                ds += di.to_scalar::<f32>()? as f64;
                total = Some(match total {
                    None => tot,
                    Some(a) => (a + tot)?,
                });
            }
            let total = (total.unwrap() / batch as f64)?;
            opt.backward_step(&total)?;
            if step % 200 == 0 || step == steps - 1 {
                eprintln!(
                    "[v3 light] step {step}: denoise {:.4} dis {:.4}",
                    dn / batch as f64,
                    ds / batch as f64
                );
            }
        }
        light_mut.save(&light_path)?;
    }
    print_csv_tail(&root.join("backbone_losses_v2.csv"), "backbone");
    let light = LightModule::load(&light_path, false, &dev)?;

    // ---- codec reconstruction quality --------------------------------
    {
        let s = load_sample(&manifest, &data_root, "s000_t00")?;
        let z = codec.encode_frames(&s.frames)?;
        let rec = codec.decode_to_frames(&z)?;
        eprintln!(
            "[codec] recon L1 {:.4}; frame stats gt {:?} rec {:?}",
            pixel_l1(&s.frames, &rec),
            stats(&s.frames),
            stats(&rec)
        );
    }

    // ---- generation probes -------------------------------------------
    let s = load_sample(&manifest, &data_root, "s000_t00")?;
    let caption = {
        let entry = manifest.sample("s000_t00")?;
        let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(
            data_root.join(&entry.frames_dir).join("metadata.json"),
        )?)?;
        meta["caption"]["text"].as_str().unwrap().to_string()
    };
    eprintln!("[diag] caption: {caption}");

    // latent statistics (sampling starts from N(0,1))
    {
        let z = codec.encode_frames(&s.frames)?;
        let v: Vec<f32> = z.flatten_all()?.to_vec1()?;
        let mean = v.iter().map(|x| *x as f64).sum::<f64>() / v.len() as f64;
        let sq = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>() / v.len() as f64;
        eprintln!("[latent] mean {:.4} std {:.4}", mean, (sq - mean * mean).sqrt());
    }

    // single-step x0 prediction quality on the true latent at several t
    {
        use lumiforge_model::dit::TextCond;
        use lumiforge_model::schedule::Schedule;
        use lumiforge_model::tensor_util::randn;
        use rand::SeedableRng;
        let schedule = Schedule::linear(backbone.config().schedule.clone())?;
        let z0 = codec.encode_frames(&s.frames)?.detach();
        let text = lumiforge_core::text::embed_text(&caption, backbone.config().d_text);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for t in [50usize, 200, 400, 700, 900, 1000] {
            let eps = randn(&mut rng, z0.dims(), &dev)?;
            let z_t = schedule.q_sample(&z0, t, &eps)?;
            let eps_hat = backbone.forward(&z_t, t, TextCond::Embedding(&text), None)?;
            let ab = schedule.alpha_bar(t)?;
            let x0_hat = ((&z_t - (&eps_hat * (1.0 - ab).sqrt())?)? / ab.sqrt())?;
            let err = (&x0_hat - &z0)?.sqr()?.mean_all()?.to_scalar::<f32>()?;
            let eps_err = (&eps_hat - &eps)?.sqr()?.mean_all()?.to_scalar::<f32>()?;
            eprintln!("[x0] t={t}: eps_mse {eps_err:.4} x0_mse {err:.4} (ab {ab:.5})");
        }
    }

    // stats of the sampled latent itself
    {
        use lumiforge_model::sampler::sample_latent;
        let mut sc = config.sample.clone();
        sc.seed = 100;
        sc.w = 1.0;
        let canvas_latent = codec.encode_frames(&s.canvases)?.detach();
        let z0 = codec.encode_frames(&s.frames)?;
        let z = sample_latent(
            &backbone,
            Some((&light, &canvas_latent)),
            &caption,
            &sc,
            z0.dims(),
        )?;
        let v: Vec<f32> = z.flatten_all()?.to_vec1()?;
        let mean = v.iter().map(|x| *x as f64).sum::<f64>() / v.len() as f64;
        let sq = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>() / v.len() as f64;
        let max = v.iter().cloned().fold(f32::MIN, f32::max);
        let min = v.iter().cloned().fold(f32::MAX, f32::min);
        eprintln!(
            "[sampled latent] mean {:.4} std {:.4} min {min:.3} max {max:.3}",
            mean,
            (sq - mean * mean).sqrt()
        );
    }

    // canvas-swap discrimination: does generation track which canvas it got?
    {
        let other = load_sample(&manifest, &data_root, "s000_t01")?;
        let mut sc = config.sample.clone();
        sc.seed = 100;
        sc.w = 1.5;
        sc.t_infer = 50;
        sc.light_scale = 1.0;
        let gen_a = sample(&backbone, &codec, Some(&light), &caption, &s.canvases, &sc)?;
        let gen_b = sample(&backbone, &codec, Some(&light), &caption, &other.canvases, &sc)?;
        eprintln!(
            "[swap] gen(c_t00): rmse vs t00 {:.4} / vs t01 {:.4}; gen(c_t01): vs t01 {:.4} / vs t00 {:.4}; l1(gen_a,gen_b) {:.4}",
            direction_rmse(&gen_a, &s.canvases)?,
            direction_rmse(&gen_a, &other.canvases)?,
            direction_rmse(&gen_b, &other.canvases)?,
            direction_rmse(&gen_b, &s.canvases)?,
            pixel_l1(&gen_a, &gen_b),
        );
    }

    for (w, t_infer) in [(1.0f64, 50usize), (1.5, 50), (2.0, 50), (1.0, 100), (2.0, 100)] {
        let mut sc = config.sample.clone();
        sc.seed = 100;
        sc.w = w;
        sc.t_infer = t_infer;
        let mut prev: Option<Vec<Image>> = None;
        for scale in [0.0f64, 0.5, 1.0] {
            sc.light_scale = scale;
            let frames = sample(&backbone, &codec, Some(&light), &caption, &s.canvases, &sc)?;
            let rmse = direction_rmse(&frames, &s.canvases)?;
            let bri = brightness_consistency(&frames, &s.frames)?;
            let gt_l1 = pixel_l1(&frames, &s.frames);
            let (m, sd) = stats(&frames);
            let delta = prev.as_ref().map(|p| pixel_l1(p, &frames)).unwrap_or(0.0);
            eprintln!(
                "[gen w={w} T={t_infer}] scale {scale}: rmse {rmse:.4} brightness {bri:.4} \
                 mean {m:.3} std {sd:.3} l1-vs-gt {gt_l1:.4} l1-vs-prev-scale {delta:.4}"
            );
            prev = Some(frames);
        }
    }
    Ok(())
}

fn print_csv_tail(path: &Path, tag: &str) {
    if let Ok(text) = std::fs::read_to_string(path) {
        let lines: Vec<&str> = text.lines().collect();
        let n = lines.len();
        for i in (1..n).step_by((n / 8).max(1)) {
            eprintln!("[{tag} loss] {}", lines[i]);
        }
        if n > 1 {
            eprintln!("[{tag} loss] {}", lines[n - 1]);
        }
    }
}
