//! The lighting-canvas representation: a camera-facing blank plane shaded
//! only by the point light(s), encoding light position and intensity and
//! nothing about the subject.
//!
//! The plane passes through the subject's head position perpendicular to
//! the camera axis and shares the camera's field of view, so the brightest
//! canvas pixel sits at the light's perpendicular foot whenever that foot
//! is in view.

use crate::error::{Error, Result};
use crate::grid::Trajectory;
use crate::image::Image;
use crate::par::{self, ExecMode};
use crate::render::{add, dot, normalize, scale, sub, Camera, SubjectScene};

/// Single-channel canvas plus the light position it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CanvasImage {
    pub pixels: Image,
    pub light_position_cm: [f64; 3],
}

/// Per-frame canvases for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CanvasSequence {
    pub canvases: Vec<CanvasImage>,
    /// Identity of the source trajectory (typically its file path).
    pub trajectory_ref: Option<String>,
}

/// Placement of the receiving plane relative to a camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CanvasGeometry {
    pub camera: Camera,
    pub plane_point_cm: [f64; 3],
}

impl CanvasGeometry {
    /// Plane through the subject's head center, facing the subject camera.
    pub fn for_scene(scene: &SubjectScene) -> Self {
        CanvasGeometry {
            camera: scene.camera,
            plane_point_cm: scene.head.center_cm,
        }
    }

    /// Plane normal, pointing back toward the camera.
    pub fn normal(&self) -> [f64; 3] {
        scale(self.camera.forward(), -1.0)
    }

    /// World position on the plane seen by pixel `(px, py)`.
    fn plane_point(&self, px: usize, py: usize) -> [f64; 3] {
        let origin = self.camera.position_cm;
        let dir = self.camera.ray(px, py);
        let n = self.normal();
        let t = dot(sub(self.plane_point_cm, origin), n) / dot(dir, n);
        add(origin, scale(dir, t))
    }
}

/// Pre-clamp canvas values: `I/d^2 * max(0, n.l)` per pixel.
pub fn render_canvas_raw(
    light_position_cm: [f64; 3],
    intensity: f64,
    geometry: &CanvasGeometry,
) -> Result<Vec<f64>> {
    if !(intensity > 0.0) {
        return Err(Error::NonPositiveIntensity(intensity));
    }
    let n = geometry.normal();
    let offset = dot(sub(light_position_cm, geometry.plane_point_cm), n);
    if offset.abs() < 1e-9 {
        return Err(Error::LightOnCanvasPlane);
    }
    let (w, h) = (geometry.camera.width, geometry.camera.height);
    let mut values = vec![0.0f64; w * h];
    for py in 0..h {
        for px in 0..w {
            let p = geometry.plane_point(px, py);
            let to_light = sub(light_position_cm, p);
            let d2 = dot(to_light, to_light);
            let l = normalize(to_light);
            let ndotl = dot(n, l);
            if ndotl > 0.0 {
                values[py * w + px] = intensity / d2 * ndotl;
            }
        }
    }
    Ok(values)
}

/// Clamped canvas for one light.
pub fn render_canvas(
    light_position_cm: [f64; 3],
    intensity: f64,
    geometry: &CanvasGeometry,
) -> Result<CanvasImage> {
    let raw = render_canvas_raw(light_position_cm, intensity, geometry)?;
    canvas_from_raw(raw, light_position_cm, geometry)
}

fn canvas_from_raw(
    raw: Vec<f64>,
    light_position_cm: [f64; 3],
    geometry: &CanvasGeometry,
) -> Result<CanvasImage> {
    let data = raw.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect();
    let pixels = Image::from_data(geometry.camera.width, geometry.camera.height, 1, data)?;
    Ok(CanvasImage {
        pixels,
        light_position_cm,
    })
}

/// One canvas per trajectory frame; multi-light frames sum per-light raw
/// canvases before clamping. `light_gain` multiplies track intensities.
pub fn render_canvas_sequence(
    trajectory: &Trajectory,
    geometry: &CanvasGeometry,
    light_gain: f64,
) -> Result<CanvasSequence> {
    render_canvas_sequence_mode(trajectory, geometry, light_gain, ExecMode::auto())
}

pub fn render_canvas_sequence_mode(
    trajectory: &Trajectory,
    geometry: &CanvasGeometry,
    light_gain: f64,
    mode: ExecMode,
) -> Result<CanvasSequence> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let canvases = par::try_map(trajectory.len(), mode, |t| -> Result<CanvasImage> {
        let lights = trajectory.lights_at(t);
        let (w, h) = (geometry.camera.width, geometry.camera.height);
        let mut sum = vec![0.0f64; w * h];
        let mut weighted_pos = [0.0f64; 3];
        let mut total_intensity = 0.0;
        for &(pos, intensity) in &lights {
            let raw = render_canvas_raw(pos, intensity * light_gain, geometry)?;
            for (acc, v) in sum.iter_mut().zip(raw) {
                *acc += v;
            }
            for a in 0..3 {
                weighted_pos[a] += pos[a] * intensity;
            }
            total_intensity += intensity;
        }
        for a in 0..3 {
            weighted_pos[a] /= total_intensity;
        }
        canvas_from_raw(sum, weighted_pos, geometry)
    })?;
    Ok(CanvasSequence {
        canvases,
        trajectory_ref: None,
    })
}
