//! Analytic portrait renderer: ray-cast ellipsoid head against a backdrop
//! plane, Lambertian diffuse + Blinn-Phong specular, inverse-square point
//! lights, hard shadows.
//!
//! All shading runs in f64 with exact quadric normals, so the cosine-law and
//! inverse-square properties hold to rounding error. Frames are pure
//! functions of the scene and light list; videos parallelize per frame.

use crate::error::{Error, Result};
use crate::grid::Trajectory;
use crate::image::Image;
use crate::par::{self, ExecMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const AMBIENT: f64 = 0.05;
/// Default point-light intensity in cd·cm²-like units; `I/d²` lands near 1
/// at the typical light-to-head distance of the default grid.
pub const DEFAULT_LIGHT_INTENSITY: f64 = 6000.0;
const SHADOW_EPS: f64 = 1e-4;

// ---------------------------------------------------------------------------
// small vector helpers (f64, [x, y, z] = [i, j, k] world axes)
// ---------------------------------------------------------------------------

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm(a);
    scale(a, 1.0 / n)
}

// ---------------------------------------------------------------------------
// scene types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center_cm: [f64; 3],
    pub semi_axes_cm: [f64; 3],
}

impl Ellipsoid {
    /// Nearest ray intersection `t > t_min`, if any.
    pub fn intersect(&self, origin: [f64; 3], dir: [f64; 3], t_min: f64) -> Option<f64> {
        let o = sub(origin, self.center_cm);
        let ax = self.semi_axes_cm;
        let os = [o[0] / ax[0], o[1] / ax[1], o[2] / ax[2]];
        let ds = [dir[0] / ax[0], dir[1] / ax[1], dir[2] / ax[2]];
        let a = dot(ds, ds);
        let b = 2.0 * dot(os, ds);
        let c = dot(os, os) - 1.0;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let t0 = (-b - sq) / (2.0 * a);
        let t1 = (-b + sq) / (2.0 * a);
        if t0 > t_min {
            Some(t0)
        } else if t1 > t_min {
            Some(t1)
        } else {
            None
        }
    }

    /// Outward surface normal at a surface point (exact quadric gradient).
    pub fn normal_at(&self, p: [f64; 3]) -> [f64; 3] {
        let d = sub(p, self.center_cm);
        let ax = self.semi_axes_cm;
        normalize([
            d[0] / (ax[0] * ax[0]),
            d[1] / (ax[1] * ax[1]),
            d[2] / (ax[2] * ax[2]),
        ])
    }
}

/// Pinhole camera; world up is +k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position_cm: [f64; 3],
    pub look_at_cm: [f64; 3],
    pub fov_y_rad: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn forward(&self) -> [f64; 3] {
        normalize(sub(self.look_at_cm, self.position_cm))
    }

    /// Basis (right, up) of the image plane; image x tracks world +i for the
    /// default front-facing setup.
    fn basis(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let forward = self.forward();
        let right = normalize(cross([0.0, 0.0, 1.0], forward));
        let up = cross(forward, right);
        (forward, right, up)
    }

    /// Ray direction through the center of pixel `(px, py)`; `py` grows
    /// downward, world-up maps to image-up.
    pub fn ray(&self, px: usize, py: usize) -> [f64; 3] {
        let (forward, right, up) = self.basis();
        let tan = (self.fov_y_rad / 2.0).tan();
        let aspect = self.width as f64 / self.height as f64;
        let ndc_x = ((px as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * tan * aspect;
        let ndc_y = (1.0 - (py as f64 + 0.5) / self.height as f64 * 2.0) * tan;
        normalize(add(forward, add(scale(right, ndc_x), scale(up, ndc_y))))
    }
}

/// Parametric portrait proxy: ellipsoid head with an ellipsoid nose in front
/// of a backdrop plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScene {
    pub subject_id: u64,
    pub head: Ellipsoid,
    pub nose: Ellipsoid,
    pub albedo_skin: [f64; 3],
    pub specular_strength: f64,
    pub shininess: f64,
    pub background_albedo: [f64; 3],
    /// Depth of the backdrop plane behind the head center, along -j.
    pub background_offset_cm: f64,
    pub camera: Camera,
}

/// Where subject heads sit: the centroid of the default light grid.
pub const HEAD_CENTER_CM: [f64; 3] = [0.0, 0.0, 80.0];

/// Deterministic subject variation: head proportions, skin tone, nose size
/// and backdrop color are all drawn from a ChaCha stream keyed by the id.
pub fn build_subject(subject_id: u64) -> SubjectScene {
    build_subject_with_resolution(subject_id, 64)
}

pub fn build_subject_with_resolution(subject_id: u64, resolution: usize) -> SubjectScene {
    let mut rng = ChaCha8Rng::seed_from_u64(subject_id);
    let vary = |rng: &mut ChaCha8Rng, base: f64| base * (1.0 + rng.gen_range(-0.15..0.15));

    let head_axes = [
        vary(&mut rng, 8.0),
        vary(&mut rng, 9.5),
        vary(&mut rng, 11.0),
    ];
    // skin tone on a light-to-deep ramp plus slight channel jitter
    let tone = rng.gen_range(0.0..1.0);
    let light = [0.95f64, 0.80, 0.70];
    let deep = [0.45f64, 0.30, 0.22];
    let mut albedo = [0.0f64; 3];
    for c in 0..3 {
        albedo[c] = (light[c] + tone * (deep[c] - light[c]) + rng.gen_range(-0.03..0.03))
            .clamp(0.05, 1.0);
    }
    let nose_scale = rng.gen_range(0.8..1.25);
    let backdrop_idx = rng.gen_range(0..crate::caption::BACKDROP_PALETTE.len());
    let background_albedo = crate::caption::BACKDROP_PALETTE[backdrop_idx].1;
    let specular_strength = rng.gen_range(0.15..0.35);
    let shininess = rng.gen_range(16.0..64.0);

    let nose = Ellipsoid {
        center_cm: [
            HEAD_CENTER_CM[0],
            HEAD_CENTER_CM[1] + head_axes[1] * 0.95,
            HEAD_CENTER_CM[2] - head_axes[2] * 0.08,
        ],
        semi_axes_cm: [1.3 * nose_scale, 2.0 * nose_scale, 2.2 * nose_scale],
    };

    SubjectScene {
        subject_id,
        head: Ellipsoid {
            center_cm: HEAD_CENTER_CM,
            semi_axes_cm: head_axes,
        },
        nose,
        albedo_skin: albedo,
        specular_strength,
        shininess,
        background_albedo: [
            background_albedo[0] as f64,
            background_albedo[1] as f64,
            background_albedo[2] as f64,
        ],
        background_offset_cm: 40.0,
        camera: Camera {
            position_cm: [0.0, 120.0, 80.0],
            look_at_cm: HEAD_CENTER_CM,
            fov_y_rad: 0.35,
            width: resolution,
            height: resolution,
        },
    }
}

impl SubjectScene {
    pub fn validate(&self) -> Result<()> {
        if self.head.semi_axes_cm.iter().any(|&a| a <= 0.0)
            || self.nose.semi_axes_cm.iter().any(|&a| a <= 0.0)
        {
            return Err(Error::InvalidScene("semi-axes must be positive".into()));
        }
        for &v in self.albedo_skin.iter().chain(self.background_albedo.iter()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidScene(format!("albedo {v} outside [0,1]")));
            }
        }
        if self.camera.width < 16 || self.camera.height < 16 {
            return Err(Error::InvalidScene("image dims must be >= 16".into()));
        }
        Ok(())
    }

    fn background_plane_j(&self) -> f64 {
        self.head.center_cm[1] - self.background_offset_cm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Surface {
    Head,
    Nose,
    Background,
}

/// Ordered lit frames at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Image>,
    pub fps: f64,
}

fn first_hit(scene: &SubjectScene, origin: [f64; 3], dir: [f64; 3]) -> Option<(Surface, f64)> {
    let mut best: Option<(Surface, f64)> = None;
    let mut consider = |surface: Surface, t: Option<f64>| {
        if let Some(t) = t {
            if best.map_or(true, |(_, bt)| t < bt) {
                best = Some((surface, t));
            }
        }
    };
    consider(Surface::Head, scene.head.intersect(origin, dir, 1e-6));
    consider(Surface::Nose, scene.nose.intersect(origin, dir, 1e-6));
    // backdrop: plane j = const with normal +j, hit only when approached from the front
    let plane_j = scene.background_plane_j();
    if dir[1] < -1e-12 {
        let t = (plane_j - origin[1]) / dir[1];
        consider(Surface::Background, (t > 1e-6).then_some(t));
    }
    best
}

fn occluded(scene: &SubjectScene, point: [f64; 3], light: [f64; 3]) -> bool {
    let to_light = sub(light, point);
    let dist = norm(to_light);
    let dir = scale(to_light, 1.0 / dist);
    for solid in [&scene.head, &scene.nose] {
        if let Some(t) = solid.intersect(point, dir, SHADOW_EPS) {
            if t < dist - SHADOW_EPS {
                return true;
            }
        }
    }
    false
}

/// Shades one frame. Radiance per pixel, pre-clamp:
/// `ambient*albedo + sum_lights I/d^2 * (albedo*max(0,n.l) + ks*max(0,n.h)^p)`
/// with hard shadows; the backdrop plane is pure Lambertian.
pub fn shade_frame(scene: &SubjectScene, lights: &[([f64; 3], f64)]) -> Result<Image> {
    shade_frame_mode(scene, lights, ExecMode::auto())
}

pub fn shade_frame_mode(
    scene: &SubjectScene,
    lights: &[([f64; 3], f64)],
    mode: ExecMode,
) -> Result<Image> {
    scene.validate()?;
    if lights.is_empty() {
        return Err(Error::Invalid("at least one light required".into()));
    }
    for &(_, intensity) in lights {
        if !(intensity > 0.0) {
            return Err(Error::NonPositiveIntensity(intensity));
        }
    }
    let (w, h) = (scene.camera.width, scene.camera.height);
    let rows = par::try_map(h, mode, |py| -> Result<Vec<f32>> {
        let mut row = vec![0f32; w * 3];
        for px in 0..w {
            let rgb = shade_pixel(scene, lights, px, py)?;
            for c in 0..3 {
                row[px * 3 + c] = rgb[c].clamp(0.0, 1.0) as f32;
            }
        }
        Ok(row)
    })?;
    let data = rows.concat();
    Image::from_data(w, h, 3, data)
}

/// Pre-clamp radiance at one pixel; exposed for the linearity tests.
pub fn shade_pixel(
    scene: &SubjectScene,
    lights: &[([f64; 3], f64)],
    px: usize,
    py: usize,
) -> Result<[f64; 3]> {
    let origin = scene.camera.position_cm;
    let dir = scene.camera.ray(px, py);
    let Some((surface, t)) = first_hit(scene, origin, dir) else {
        return Ok([0.0; 3]);
    };
    let point = add(origin, scale(dir, t));
    let (normal, albedo, ks, shininess) = match surface {
        Surface::Head => (
            scene.head.normal_at(point),
            scene.albedo_skin,
            scene.specular_strength,
            scene.shininess,
        ),
        Surface::Nose => (
            scene.nose.normal_at(point),
            scene.albedo_skin,
            scene.specular_strength,
            scene.shininess,
        ),
        Surface::Background => ([0.0, 1.0, 0.0], scene.background_albedo, 0.0, 1.0),
    };
    let view = scale(dir, -1.0);
    let mut out = scale(albedo, AMBIENT);
    for &(light_pos, intensity) in lights {
        let to_light = sub(light_pos, point);
        let d = norm(to_light);
        if d < 1e-6 {
            return Err(Error::DegenerateLight);
        }
        if occluded(scene, point, light_pos) {
            continue;
        }
        let l = scale(to_light, 1.0 / d);
        let falloff = intensity / (d * d);
        let ndotl = dot(normal, l);
        if ndotl > 0.0 {
            out = add(out, scale(albedo, falloff * ndotl));
        }
        if ks > 0.0 {
            let half = normalize(add(l, view));
            let ndoth = dot(normal, half);
            if ndoth > 0.0 && ndotl > 0.0 {
                let spec = falloff * ks * ndoth.powf(shininess);
                out = add(out, [spec, spec, spec]);
            }
        }
    }
    Ok(out)
}

/// Renders one frame per trajectory step; `light_gain` multiplies every
/// track intensity (trajectories carry relative intensities).
pub fn render_video(
    scene: &SubjectScene,
    trajectory: &Trajectory,
    fps: f64,
    light_gain: f64,
) -> Result<FrameSequence> {
    render_video_mode(scene, trajectory, fps, light_gain, ExecMode::auto())
}

pub fn render_video_mode(
    scene: &SubjectScene,
    trajectory: &Trajectory,
    fps: f64,
    light_gain: f64,
    mode: ExecMode,
) -> Result<FrameSequence> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let frames = par::try_map(trajectory.len(), mode, |t| {
        let lights: Vec<([f64; 3], f64)> = trajectory
            .lights_at(t)
            .into_iter()
            .map(|(p, i)| (p, i * light_gain))
            .collect();
        // frames parallelize outside; avoid nested pools
        shade_frame_mode(scene, &lights, ExecMode::Sequential)
    })?;
    Ok(FrameSequence { frames, fps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{linear_trajectory, GridIndex, LightGrid};

    fn test_scene() -> SubjectScene {
        build_subject(3)
    }

    /// Laterally symmetric scene: head/nose centered, sphere-free of the
    /// random asymmetries only lights introduce.
    fn symmetric_scene() -> SubjectScene {
        let mut scene = build_subject(0);
        scene.camera.width = 48;
        scene.camera.height = 48;
        scene
    }

    /// Scene with the nose shrunk and moved far behind the head so the
    /// central pixel ray hits the head ellipsoid itself.
    fn noseless_scene() -> SubjectScene {
        let mut scene = test_scene();
        scene.nose.center_cm = [0.0, -200.0, 80.0];
        scene.nose.semi_axes_cm = [0.1, 0.1, 0.1];
        scene
    }

    #[test]
    fn build_subject_is_deterministic() {
        assert_eq!(build_subject(0), build_subject(0));
        assert_eq!(build_subject(41), build_subject(41));
    }

    #[test]
    fn sixty_five_subjects_are_distinct() {
        let scenes: Vec<_> = (0..65).map(build_subject).collect();
        for a in 0..65 {
            for b in (a + 1)..65 {
                assert_ne!(scenes[a], scenes[b], "subjects {a} and {b} collide");
            }
        }
    }

    #[test]
    fn head_center_matches_grid_centroid() {
        let grid = LightGrid::default_portrait();
        assert_eq!(build_subject(7).head.center_cm, grid.centroid_cm());
    }

    #[test]
    fn inverse_square_falloff_exact() {
        let mut scene = noseless_scene();
        // no specular so the diffuse ratio is clean
        scene.specular_strength = 0.0;
        let px = scene.camera.width / 2;
        let py = scene.camera.height / 2;
        let amb = scale(scene.albedo_skin, AMBIENT);
        // light positions along the surface normal, distances 50 and 100
        let origin = scene.camera.position_cm;
        let raydir = scene.camera.ray(px, py);
        let t = scene.head.intersect(origin, raydir, 1e-6).unwrap();
        let p = add(origin, scale(raydir, t));
        let n = scene.head.normal_at(p);
        let l1 = add(p, scale(n, 50.0));
        let l2 = add(p, scale(n, 100.0));
        let v1 = shade_pixel(&scene, &[(l1, 1000.0)], px, py).unwrap();
        let v2 = shade_pixel(&scene, &[(l2, 1000.0)], px, py).unwrap();
        for c in 0..3 {
            let d1 = v1[c] - amb[c];
            let d2 = v2[c] - amb[c];
            assert!((d1 / d2 - 4.0).abs() < 1e-9, "ratio {} at {c}", d1 / d2);
        }
    }

    #[test]
    fn grazing_light_contributes_nothing() {
        let mut scene = noseless_scene();
        scene.specular_strength = 0.0;
        let px = scene.camera.width / 2;
        let py = scene.camera.height / 2;
        let origin = scene.camera.position_cm;
        let raydir = scene.camera.ray(px, py);
        let t = scene.head.intersect(origin, raydir, 1e-6).unwrap();
        let p = add(origin, scale(raydir, t));
        let n = scene.head.normal_at(p);
        // a tangent direction: n x up
        let tangent = normalize(cross(n, [0.0, 0.0, 1.0]));
        let light = add(p, scale(tangent, 50.0));
        let v = shade_pixel(&scene, &[(light, 1000.0)], px, py).unwrap();
        let amb = scale(scene.albedo_skin, AMBIENT);
        for c in 0..3 {
            assert!((v[c] - amb[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn camera_axis_light_peaks_at_center_on_sphere() {
        let mut scene = symmetric_scene();
        scene.head.semi_axes_cm = [9.0, 9.0, 9.0];
        // drop the nose far behind the head so the sphere is unperturbed
        scene.nose.center_cm = [0.0, -200.0, 80.0];
        scene.nose.semi_axes_cm = [0.1, 0.1, 0.1];
        scene.specular_strength = 0.0;
        let light = ([0.0, 110.0, 80.0], 4000.0);
        let img = shade_frame(&scene, &[light]).unwrap();
        let lum = img.luminance();
        let (w, h) = (img.width(), img.height());
        let center = lum[(h / 2) * w + w / 2].max(lum[(h / 2 - 1) * w + w / 2 - 1]);
        let max = lum.iter().cloned().fold(0.0f32, f32::max);
        assert!(center >= max - 1e-6, "center {center} vs max {max}");
        // lateral symmetry of the sphere render
        assert!(img.max_abs_diff(&img.mirror_h()) <= 1e-6);
    }

    #[test]
    fn mirrored_lights_give_mirrored_frames() {
        let scene = symmetric_scene();
        let light = ([35.0, 60.0, 95.0], 5000.0);
        let mirrored = ([-35.0, 60.0, 95.0], 5000.0);
        let a = shade_frame(&scene, &[light]).unwrap();
        let b = shade_frame(&scene, &[mirrored]).unwrap();
        assert!(a.max_abs_diff(&b.mirror_h()) <= 1e-6);
    }

    #[test]
    fn static_trajectory_renders_identical_frames() {
        let scene = symmetric_scene();
        let grid = LightGrid::default_portrait();
        let traj = linear_trajectory(&grid, GridIndex::new(20, 28, 20), GridIndex::new(20, 28, 20), 3)
            .unwrap();
        let video = render_video(&scene, &Trajectory::Single(traj), 8.0, 6000.0).unwrap();
        assert_eq!(video.frames[0], video.frames[1]);
        assert_eq!(video.frames[1], video.frames[2]);
    }

    #[test]
    fn energy_monotonicity_preclamp() {
        let scene = test_scene();
        let light = [30.0, 70.0, 100.0];
        for px in (0..scene.camera.width).step_by(7) {
            for py in (0..scene.camera.height).step_by(7) {
                let lo = shade_pixel(&scene, &[(light, 2000.0)], px, py).unwrap();
                let hi = shade_pixel(&scene, &[(light, 4000.0)], px, py).unwrap();
                for c in 0..3 {
                    assert!(hi[c] >= lo[c] - 1e-12);
                }
            }
        }
    }

    #[test]
    fn degenerate_light_rejected() {
        let scene = noseless_scene();
        // a light exactly on the head surface at the central pixel
        let px = scene.camera.width / 2;
        let py = scene.camera.height / 2;
        let origin = scene.camera.position_cm;
        let raydir = scene.camera.ray(px, py);
        let t = scene.head.intersect(origin, raydir, 1e-6).unwrap();
        let p = add(origin, scale(raydir, t));
        assert!(matches!(
            shade_pixel(&scene, &[(p, 1000.0)], px, py),
            Err(Error::DegenerateLight)
        ));
    }

    #[test]
    fn fully_occluded_pixel_is_ambient_only() {
        let mut scene = test_scene();
        scene.specular_strength = 0.0;
        // light directly behind the head: camera-facing pixels are shadowed
        let light = ([0.0, -70.0, 80.0], 5000.0);
        let px = scene.camera.width / 2;
        let py = scene.camera.height / 2;
        let v = shade_pixel(&scene, &[light], px, py).unwrap();
        let amb = scale(scene.albedo_skin, AMBIENT);
        for c in 0..3 {
            assert!((v[c] - amb[c]).abs() < 1e-9, "channel {c}: {} vs {}", v[c], amb[c]);
        }
    }

    #[test]
    fn parallel_and_sequential_render_agree() {
        let scene = test_scene();
        let light = [(40.0, 60.0, 110.0)].map(|(a, b, c)| ([a, b, c], 5000.0));
        let a = shade_frame_mode(&scene, &light, ExecMode::Sequential).unwrap();
        let b = shade_frame_mode(&scene, &light, ExecMode::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
