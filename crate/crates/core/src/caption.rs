//! Deterministic caption templates and paraphrase-based augmentation.
//!
//! Captions are filled from a fixed template bank using scene parameters and
//! a seed, so the same `(scene, seed)` always reproduces the same text.
//! Augmentation varies the background/context slots while pinning the
//! subject descriptor, which is what enables the caption-augmentation
//! ablation without touching pixels.

use crate::error::{Error, Result};
use crate::render::SubjectScene;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Named backdrop colors; the renderer picks subject backdrops from this
/// palette so caption color words match the rendered pixels.
pub const BACKDROP_PALETTE: &[(&str, [f32; 3])] = &[
    ("gray", [0.50, 0.50, 0.52]),
    ("charcoal", [0.18, 0.18, 0.20]),
    ("ivory", [0.92, 0.90, 0.84]),
    ("blue", [0.25, 0.35, 0.65]),
    ("teal", [0.15, 0.50, 0.50]),
    ("olive", [0.42, 0.45, 0.22]),
    ("burgundy", [0.45, 0.15, 0.20]),
    ("violet", [0.45, 0.30, 0.60]),
];

const TEMPLATES: &[&str] = &[
    "a {adjective} {person} in front of a {background}",
    "portrait of a {adjective} {person} against a {background}",
    "a {adjective} {person}, studio shot, {background} behind",
    "close-up of a {adjective} {person} before a {background}",
];

const PERSONS: &[&str] = &["person", "young person", "model", "sitter", "subject"];

const BACKDROP_NOUNS: &[&str] = &["backdrop", "wall", "studio screen", "curtain"];

/// Reproducible caption: `text` is a pure function of `(template_id, slots)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub text: String,
    pub template_id: usize,
    pub slots: BTreeMap<String, String>,
}

fn fill(template: &str, slots: &BTreeMap<String, String>) -> String {
    let mut text = template.to_string();
    for (name, value) in slots {
        text = text.replace(&format!("{{{name}}}"), value);
    }
    text
}

/// Skin-tone adjective derived from the scene's skin albedo.
fn skin_adjective(scene: &SubjectScene) -> &'static str {
    let mean = (scene.albedo_skin[0] + scene.albedo_skin[1] + scene.albedo_skin[2]) / 3.0;
    if mean > 0.7 {
        "fair-skinned"
    } else if mean > 0.55 {
        "tan"
    } else if mean > 0.4 {
        "olive-skinned"
    } else {
        "dark-skinned"
    }
}

/// Nearest palette name to the scene's backdrop color.
pub fn backdrop_color_name(scene: &SubjectScene) -> &'static str {
    let mut best = BACKDROP_PALETTE[0].0;
    let mut best_d = f64::INFINITY;
    for &(name, rgb) in BACKDROP_PALETTE {
        let d: f64 = (0..3)
            .map(|c| (scene.background_albedo[c] - rgb[c] as f64).powi(2))
            .sum();
        if d < best_d {
            best_d = d;
            best = name;
        }
    }
    best
}

/// Validated, non-empty template bank; emptiness is rejected at
/// construction rather than at caption time.
#[derive(Debug, Clone)]
pub struct TemplateBank {
    templates: Vec<String>,
}

impl TemplateBank {
    pub fn new(templates: Vec<String>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::EmptyTemplateBank);
        }
        Ok(TemplateBank { templates })
    }

    pub fn builtin() -> Self {
        TemplateBank {
            templates: TEMPLATES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn template(&self, id: usize) -> &str {
        &self.templates[id]
    }
}

/// Deterministic template fill from scene parameters and a seed, using the
/// built-in bank.
pub fn generate_caption(scene: &SubjectScene, rng_seed: u64) -> Caption {
    generate_caption_with(&TemplateBank::builtin(), scene, rng_seed)
}

pub fn generate_caption_with(bank: &TemplateBank, scene: &SubjectScene, rng_seed: u64) -> Caption {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ scene.subject_id.wrapping_mul(0x9e3779b9));
    let template_id = rng.gen_range(0..bank.len());
    let mut slots = BTreeMap::new();
    slots.insert(
        "adjective".to_string(),
        skin_adjective(scene).to_string(),
    );
    slots.insert(
        "person".to_string(),
        PERSONS[rng.gen_range(0..PERSONS.len())].to_string(),
    );
    slots.insert(
        "background".to_string(),
        format!(
            "{} {}",
            backdrop_color_name(scene),
            BACKDROP_NOUNS[rng.gen_range(0..BACKDROP_NOUNS.len())]
        ),
    );
    let text = fill(bank.template(template_id), &slots);
    Caption {
        text,
        template_id,
        slots,
    }
}

/// The subject descriptor shared by a caption and all its variants.
pub fn subject_descriptor(caption: &Caption) -> String {
    format!(
        "{} {}",
        caption.slots["adjective"], caption.slots["person"]
    )
}

/// `n_variants` paraphrases varying template and background slots while
/// keeping the subject slot fixed.
pub fn augment_caption(caption: &Caption, n_variants: usize, rng_seed: u64) -> Result<Vec<Caption>> {
    if n_variants == 0 {
        return Err(Error::Invalid("n_variants must be >= 1".into()));
    }
    let bank = TemplateBank::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed.wrapping_add(0x5bd1e995));
    let mut out = Vec::with_capacity(n_variants);
    for _ in 0..n_variants {
        let template_id = rng.gen_range(0..bank.len());
        let mut slots = caption.slots.clone();
        let color = BACKDROP_PALETTE[rng.gen_range(0..BACKDROP_PALETTE.len())].0;
        let noun = BACKDROP_NOUNS[rng.gen_range(0..BACKDROP_NOUNS.len())];
        slots.insert("background".to_string(), format!("{color} {noun}"));
        let text = fill(bank.template(template_id), &slots);
        out.push(Caption {
            text,
            template_id,
            slots,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::build_subject;

    #[test]
    fn caption_is_deterministic() {
        let scene = build_subject(2);
        assert_eq!(generate_caption(&scene, 9), generate_caption(&scene, 9));
    }

    #[test]
    fn caption_text_reproducible_from_parts() {
        let scene = build_subject(5);
        let c = generate_caption(&scene, 17);
        assert_eq!(
            c.text,
            fill(TemplateBank::builtin().template(c.template_id), &c.slots)
        );
    }

    #[test]
    fn hundred_seeds_give_many_distinct_captions() {
        let scene = build_subject(1);
        let distinct: std::collections::HashSet<String> =
            (0..100).map(|s| generate_caption(&scene, s).text).collect();
        assert!(distinct.len() >= 20, "only {} distinct captions", distinct.len());
    }

    #[test]
    fn variants_keep_subject_descriptor() {
        let scene = build_subject(4);
        let base = generate_caption(&scene, 0);
        let descriptor = subject_descriptor(&base);
        let variants = augment_caption(&base, 8, 1).unwrap();
        assert_eq!(variants.len(), 8);
        for v in &variants {
            assert!(v.text.contains(&descriptor), "{} missing {}", v.text, descriptor);
        }
        // deterministic
        assert_eq!(variants, augment_caption(&base, 8, 1).unwrap());
    }

    #[test]
    fn single_variant_list() {
        let scene = build_subject(4);
        let base = generate_caption(&scene, 0);
        assert_eq!(augment_caption(&base, 1, 0).unwrap().len(), 1);
        assert!(augment_caption(&base, 0, 0).is_err());
    }

    #[test]
    fn backdrop_name_matches_palette_choice() {
        for id in 0..16 {
            let scene = build_subject(id);
            let name = backdrop_color_name(&scene);
            let rgb = BACKDROP_PALETTE
                .iter()
                .find(|(n, _)| *n == name)
                .unwrap()
                .1;
            for c in 0..3 {
                assert!((scene.background_albedo[c] - rgb[c] as f64).abs() < 1e-9);
            }
        }
    }
}
