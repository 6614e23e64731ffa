//! Latent video diffusion at desk scale: a shared convolutional VAE codec,
//! a text-conditioned diffusion transformer backbone, a plug-and-play light
//! module with per-layer merge injection, the dual-branch disentanglement
//! trainer and a deterministic DDIM sampler.
//!
//! Everything runs on CPU tensors with explicit seeding; forward passes are
//! pure functions of `(parameters, inputs)`.

pub mod checkpoint;
pub mod codec;
pub mod dit;
pub mod error;
pub mod light_encoder;
pub mod params;
pub mod sampler;
pub mod schedule;
pub mod tensor_util;
pub mod trainer;

pub use error::{Error, Result};
pub use schedule::Schedule;
