//! 3D light-position lattice and deterministic light trajectories.
//!
//! The lattice is a cube of point-light positions spaced uniformly along
//! each axis. Axis convention, used consistently everywhere downstream:
//! `i` is camera-horizontal (subject's left to right), `j` is depth toward
//! the camera, `k` is vertical.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Uniform cubic lattice of candidate point-light positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightGrid {
    extent_cm: f64,
    spacing_cm: f64,
    n_per_axis: usize,
    origin_cm: [f64; 3],
}

/// Integer coordinate of one lattice point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl GridIndex {
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        GridIndex { i, j, k }
    }
}

impl LightGrid {
    /// Builds the lattice; `spacing_cm` must divide `extent_cm` (relative
    /// tolerance 1e-9).
    pub fn build(extent_cm: f64, spacing_cm: f64, origin_cm: [f64; 3]) -> Result<Self> {
        if !(extent_cm > 0.0) || !(spacing_cm > 0.0) {
            return Err(Error::Invalid(format!(
                "extent and spacing must be positive, got {extent_cm}, {spacing_cm}"
            )));
        }
        let ratio = extent_cm / spacing_cm;
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::NonDivisibleSpacing {
                extent_cm,
                spacing_cm,
            });
        }
        Ok(LightGrid {
            extent_cm,
            spacing_cm,
            n_per_axis: rounded as usize + 1,
            origin_cm,
        })
    }

    /// The paper-scale default: a 160 cm cube at 5 cm spacing, centered on
    /// the subject laterally and in depth, resting on the floor vertically.
    pub fn default_portrait() -> Self {
        LightGrid::build(160.0, 5.0, [-80.0, -80.0, 0.0]).expect("default grid is divisible")
    }

    pub fn extent_cm(&self) -> f64 {
        self.extent_cm
    }

    pub fn spacing_cm(&self) -> f64 {
        self.spacing_cm
    }

    pub fn origin_cm(&self) -> [f64; 3] {
        self.origin_cm
    }

    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    pub fn total_positions(&self) -> usize {
        self.n_per_axis.pow(3)
    }

    /// World-space centroid of the lattice.
    pub fn centroid_cm(&self) -> [f64; 3] {
        let half = self.extent_cm / 2.0;
        [
            self.origin_cm[0] + half,
            self.origin_cm[1] + half,
            self.origin_cm[2] + half,
        ]
    }

    pub fn contains(&self, idx: GridIndex) -> bool {
        idx.i < self.n_per_axis && idx.j < self.n_per_axis && idx.k < self.n_per_axis
    }

    pub fn check(&self, idx: GridIndex) -> Result<GridIndex> {
        if self.contains(idx) {
            Ok(idx)
        } else {
            Err(Error::IndexOutOfBounds {
                i: idx.i as i64,
                j: idx.j as i64,
                k: idx.k as i64,
                n_per_axis: self.n_per_axis,
            })
        }
    }

    /// World position of a lattice point: `origin + index * spacing`, exactly.
    pub fn world_position(&self, idx: GridIndex) -> [f64; 3] {
        [
            self.origin_cm[0] + idx.i as f64 * self.spacing_cm,
            self.origin_cm[1] + idx.j as f64 * self.spacing_cm,
            self.origin_cm[2] + idx.k as f64 * self.spacing_cm,
        ]
    }

    /// Nearest lattice point to a world position (round half away from zero
    /// per axis). Errors when the snap leaves the lattice.
    pub fn snap(&self, world_cm: [f64; 3]) -> Result<GridIndex> {
        let mut idx = [0i64; 3];
        for a in 0..3 {
            idx[a] = ((world_cm[a] - self.origin_cm[a]) / self.spacing_cm).round() as i64;
        }
        let n = self.n_per_axis as i64;
        if idx.iter().any(|&v| v < 0 || v >= n) {
            return Err(Error::IndexOutOfBounds {
                i: idx[0],
                j: idx[1],
                k: idx[2],
                n_per_axis: self.n_per_axis,
            });
        }
        Ok(GridIndex::new(
            idx[0] as usize,
            idx[1] as usize,
            idx[2] as usize,
        ))
    }

    /// Enumerates every lattice point in `i`-major order.
    pub fn positions(&self) -> impl Iterator<Item = GridIndex> + '_ {
        let n = self.n_per_axis;
        (0..n).flat_map(move |i| (0..n).flat_map(move |j| (0..n).map(move |k| GridIndex { i, j, k })))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Horizontal,
    Vertical,
    Diagonal,
    Arc,
    Custom,
}

/// Plane in which an arc trajectory is swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcPlane {
    /// Horizontal/vertical camera-facing plane (axes i, k).
    Ik,
    /// Horizontal/depth plane (axes i, j).
    Ij,
    /// Depth/vertical plane (axes j, k).
    Jk,
}

/// Ordered walk over lattice points, one point per output frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LightTrajectory {
    grid: LightGrid,
    points: Vec<GridIndex>,
    kind: TrajectoryKind,
}

impl LightTrajectory {
    pub fn from_points(grid: LightGrid, points: Vec<GridIndex>, kind: TrajectoryKind) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        for &p in &points {
            grid.check(p)?;
        }
        Ok(LightTrajectory { grid, points, kind })
    }

    pub fn grid(&self) -> &LightGrid {
        &self.grid
    }

    pub fn points(&self) -> &[GridIndex] {
        &self.points
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// World-space light position at frame `t`.
    pub fn world_at(&self, t: usize) -> [f64; 3] {
        self.grid.world_position(self.points[t])
    }

    /// Resamples to `n_frames` by nearest-index lookup.
    pub fn resample(&self, n_frames: usize) -> Result<LightTrajectory> {
        if n_frames == 0 {
            return Err(Error::EmptyTrajectory);
        }
        let m = self.points.len();
        let points = (0..n_frames)
            .map(|t| {
                let pos = if n_frames == 1 {
                    0.0
                } else {
                    t as f64 * (m - 1) as f64 / (n_frames - 1) as f64
                };
                self.points[pos.round() as usize]
            })
            .collect();
        Ok(LightTrajectory {
            grid: self.grid,
            points,
            kind: self.kind,
        })
    }
}

/// Straight lattice walk from `start` to `end` with rounded interpolation.
pub fn linear_trajectory(
    grid: &LightGrid,
    start: GridIndex,
    end: GridIndex,
    n_frames: usize,
) -> Result<LightTrajectory> {
    grid.check(start)?;
    grid.check(end)?;
    if n_frames == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let lerp = |a: usize, b: usize, s: f64| -> usize {
        (a as f64 + s * (b as f64 - a as f64)).round() as usize
    };
    let points: Vec<GridIndex> = (0..n_frames)
        .map(|t| {
            let s = if n_frames == 1 {
                0.0
            } else {
                t as f64 / (n_frames - 1) as f64
            };
            GridIndex::new(
                lerp(start.i, end.i, s),
                lerp(start.j, end.j, s),
                lerp(start.k, end.k, s),
            )
        })
        .collect();
    let vi = start.i != end.i;
    let vj = start.j != end.j;
    let vk = start.k != end.k;
    let kind = match (vi, vj, vk) {
        (true, false, false) => TrajectoryKind::Horizontal,
        (false, false, true) => TrajectoryKind::Vertical,
        (false, false, false) => TrajectoryKind::Custom,
        _ => TrajectoryKind::Diagonal,
    };
    LightTrajectory::from_points(*grid, points, kind)
}

/// Circular arc around `center`, snapped to the lattice.
#[allow(clippy::too_many_arguments)]
pub fn arc_trajectory(
    grid: &LightGrid,
    center: GridIndex,
    radius_cm: f64,
    plane: ArcPlane,
    angle_start: f64,
    angle_end: f64,
    n_frames: usize,
) -> Result<LightTrajectory> {
    grid.check(center)?;
    if n_frames == 0 {
        return Err(Error::EmptyTrajectory);
    }
    if radius_cm < 0.0 {
        return Err(Error::Invalid(format!("negative radius {radius_cm}")));
    }
    let c = grid.world_position(center);
    let (a_axis, b_axis) = match plane {
        ArcPlane::Ik => (0usize, 2usize),
        ArcPlane::Ij => (0, 1),
        ArcPlane::Jk => (1, 2),
    };
    let mut points = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let s = if n_frames == 1 {
            0.0
        } else {
            t as f64 / (n_frames - 1) as f64
        };
        let theta = angle_start + s * (angle_end - angle_start);
        let mut world = c;
        world[a_axis] += radius_cm * theta.cos();
        world[b_axis] += radius_cm * theta.sin();
        let idx = grid
            .snap(world)
            .map_err(|_| Error::TrajectoryOutOfBounds { frame: t, world })?;
        points.push(idx);
    }
    LightTrajectory::from_points(*grid, points, TrajectoryKind::Arc)
}

/// Several equal-length trajectories driven simultaneously with per-track
/// intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLightTrajectory {
    tracks: Vec<LightTrajectory>,
    intensities: Vec<f64>,
}

impl MultiLightTrajectory {
    pub fn tracks(&self) -> &[LightTrajectory] {
        &self.tracks
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn len(&self) -> usize {
        self.tracks[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> &LightGrid {
        self.tracks[0].grid()
    }

    /// World-space `(position, intensity)` pairs for frame `t`.
    pub fn lights_at(&self, t: usize) -> Vec<([f64; 3], f64)> {
        self.tracks
            .iter()
            .zip(&self.intensities)
            .map(|(track, &intensity)| (track.world_at(t), intensity))
            .collect()
    }
}

/// Combines equal-length tracks over the same grid into a multi-light drive.
pub fn superpose(tracks: Vec<LightTrajectory>, intensities: Vec<f64>) -> Result<MultiLightTrajectory> {
    if tracks.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if tracks.len() != intensities.len() {
        return Err(Error::TrajectoryLengthMismatch {
            a: tracks.len(),
            b: intensities.len(),
        });
    }
    let len = tracks[0].len();
    let grid = *tracks[0].grid();
    for track in &tracks {
        if track.len() != len {
            return Err(Error::TrajectoryLengthMismatch {
                a: len,
                b: track.len(),
            });
        }
        if *track.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    for &intensity in &intensities {
        if !(intensity > 0.0) {
            return Err(Error::NonPositiveIntensity(intensity));
        }
    }
    Ok(MultiLightTrajectory { tracks, intensities })
}

/// Either a single track or a multi-light superposition; the unit the
/// renderer and dataset builder consume.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Single(LightTrajectory),
    Multi(MultiLightTrajectory),
}

impl Trajectory {
    pub fn len(&self) -> usize {
        match self {
            Trajectory::Single(t) => t.len(),
            Trajectory::Multi(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> &LightGrid {
        match self {
            Trajectory::Single(t) => t.grid(),
            Trajectory::Multi(m) => m.grid(),
        }
    }

    /// World-space `(position, intensity)` pairs for frame `t`; a single
    /// track carries unit intensity.
    pub fn lights_at(&self, t: usize) -> Vec<([f64; 3], f64)> {
        match self {
            Trajectory::Single(track) => vec![(track.world_at(t), 1.0)],
            Trajectory::Multi(m) => m.lights_at(t),
        }
    }

    pub fn resample(&self, n_frames: usize) -> Result<Trajectory> {
        match self {
            Trajectory::Single(t) => Ok(Trajectory::Single(t.resample(n_frames)?)),
            Trajectory::Multi(m) => {
                let tracks = m
                    .tracks
                    .iter()
                    .map(|t| t.resample(n_frames))
                    .collect::<Result<Vec<_>>>()?;
                superpose(tracks, m.intensities.clone()).map(Trajectory::Multi)
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(TrajectoryFile::from(self)).expect("trajectory serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&TrajectoryFile::from(self))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Trajectory> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: TrajectoryFile = serde_json::from_str(&text)?;
        file.try_into()
    }
}

impl From<LightTrajectory> for Trajectory {
    fn from(t: LightTrajectory) -> Self {
        Trajectory::Single(t)
    }
}

impl From<MultiLightTrajectory> for Trajectory {
    fn from(m: MultiLightTrajectory) -> Self {
        Trajectory::Multi(m)
    }
}

#[derive(Serialize, Deserialize)]
struct GridFileSpec {
    extent_cm: f64,
    spacing_cm: f64,
    origin_cm: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct TrackFileSpec {
    kind: TrajectoryKind,
    points: Vec<[usize; 3]>,
}

/// On-disk trajectory document. A single track serializes as
/// `{grid, kind, points}`; a superposition adds `tracks` and `intensities`.
#[derive(Serialize, Deserialize)]
struct TrajectoryFile {
    grid: GridFileSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<TrajectoryKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[usize; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tracks: Option<Vec<TrackFileSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intensities: Option<Vec<f64>>,
}

fn to_triples(points: &[GridIndex]) -> Vec<[usize; 3]> {
    points.iter().map(|p| [p.i, p.j, p.k]).collect()
}

fn from_triples(points: &[[usize; 3]]) -> Vec<GridIndex> {
    points.iter().map(|p| GridIndex::new(p[0], p[1], p[2])).collect()
}

impl From<&Trajectory> for TrajectoryFile {
    fn from(value: &Trajectory) -> Self {
        let grid = *value.grid();
        let grid = GridFileSpec {
            extent_cm: grid.extent_cm(),
            spacing_cm: grid.spacing_cm(),
            origin_cm: grid.origin_cm(),
        };
        match value {
            Trajectory::Single(t) => TrajectoryFile {
                grid,
                kind: Some(t.kind()),
                points: Some(to_triples(t.points())),
                tracks: None,
                intensities: None,
            },
            Trajectory::Multi(m) => TrajectoryFile {
                grid,
                kind: None,
                points: None,
                tracks: Some(
                    m.tracks()
                        .iter()
                        .map(|t| TrackFileSpec {
                            kind: t.kind(),
                            points: to_triples(t.points()),
                        })
                        .collect(),
                ),
                intensities: Some(m.intensities().to_vec()),
            },
        }
    }
}

impl TryFrom<TrajectoryFile> for Trajectory {
    type Error = Error;

    fn try_from(file: TrajectoryFile) -> Result<Trajectory> {
        let grid = LightGrid::build(file.grid.extent_cm, file.grid.spacing_cm, file.grid.origin_cm)?;
        match (file.points, file.tracks) {
            (Some(points), None) => {
                let kind = file.kind.unwrap_or(TrajectoryKind::Custom);
                LightTrajectory::from_points(grid, from_triples(&points), kind)
                    .map(Trajectory::Single)
            }
            (None, Some(tracks)) => {
                let intensities = file
                    .intensities
                    .ok_or_else(|| Error::Invalid("multi-track file missing intensities".into()))?;
                let tracks = tracks
                    .into_iter()
                    .map(|t| LightTrajectory::from_points(grid, from_triples(&t.points), t.kind))
                    .collect::<Result<Vec<_>>>()?;
                superpose(tracks, intensities).map(Trajectory::Multi)
            }
            _ => Err(Error::Invalid(
                "trajectory file must carry either points or tracks".into(),
            )),
        }
    }
}
