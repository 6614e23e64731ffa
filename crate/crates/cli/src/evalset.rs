//! Held-out evaluation pairs: trajectories and captions absent from the
//! training dataset, generated deterministically from the sweep seed.
//!
//! Mirrors the evaluation protocol of testing on light paths and captions
//! not present in training, scaled down to a configurable pair count.

use crate::error::CliError;
use lumiforge_core::caption::generate_caption;
use lumiforge_core::grid::{linear_trajectory, GridIndex, LightGrid, Trajectory};
use lumiforge_core::render::{build_subject_with_resolution, SubjectScene};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Subject ids below this belong to the training namespace; held-out scenes
/// start here so their appearance never appears in a training dataset.
pub const HELD_OUT_SUBJECT_BASE: u64 = 1000;

pub struct EvalPair {
    pub trajectory: Trajectory,
    pub caption: String,
    pub scene: SubjectScene,
}

/// `n` deterministic (trajectory, caption) pairs on `grid`. Trajectories
/// are random linear sweeps kept strictly in front of the canvas plane;
/// captions come from held-out subject scenes.
pub fn held_out_pairs(
    grid: &LightGrid,
    n: usize,
    n_frames: usize,
    resolution: usize,
    seed: u64,
) -> Result<Vec<EvalPair>, CliError> {
    if n == 0 {
        return Err(CliError::Run {
            kind: "evalset".into(),
            detail: "eval pair count must be >= 1".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6576_616c);
    let side = grid.n_per_axis();
    let mut pairs = Vec::with_capacity(n);
    for idx in 0..n {
        // j stays in the front half (and off the canvas plane at j = mid)
        let pick = |rng: &mut ChaCha8Rng| -> GridIndex {
            GridIndex::new(
                rng.gen_range(2..side - 2),
                rng.gen_range(side / 2 + 4..side - 2),
                rng.gen_range(2..side - 2),
            )
        };
        let start = pick(&mut rng);
        let mut end = pick(&mut rng);
        while end == start {
            end = pick(&mut rng);
        }
        let track = linear_trajectory(grid, start, end, n_frames)?;
        let scene =
            build_subject_with_resolution(HELD_OUT_SUBJECT_BASE + idx as u64, resolution);
        let caption = generate_caption(&scene, rng.gen()).text;
        pairs.push(EvalPair {
            trajectory: Trajectory::Single(track),
            caption,
            scene,
        });
    }
    Ok(pairs)
}
