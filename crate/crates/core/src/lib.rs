//! Procedural portrait-lighting data synthesis and evaluation.
//!
//! This crate provides the non-learned half of the lumiforge pipeline:
//!
//! - a 3D light-position lattice and deterministic light trajectories
//!   ([`grid`]),
//! - an analytic ray-cast portrait renderer producing ground-truth lit
//!   frames ([`render`]),
//! - the lighting-canvas representation used as the conditioning signal
//!   ([`canvas`]),
//! - a captioned dataset builder with a JSON manifest ([`dataset`]),
//! - the five lighting-fidelity metrics plus a light-direction estimator
//!   ([`metrics`]).
//!
//! Everything here is deterministic given its inputs and seeds. Inner
//! per-frame loops are data-parallel via rayon when the `parallel` feature
//! (default) is enabled; a sequential fallback is always compiled in.

pub mod canvas;
pub mod caption;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod image;
pub mod metrics;
pub mod par;
pub mod render;
pub mod text;

pub use error::{Error, Result};
pub use grid::{GridIndex, LightGrid, LightTrajectory, MultiLightTrajectory, Trajectory};
pub use image::Image;
