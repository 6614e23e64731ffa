//! Subcommand implementations, one module each. Every function is pure
//! with respect to (config, seed, input files): reruns produce identical
//! outputs.

pub mod dataset;
pub mod evaluate;
pub mod sample;
pub mod sweep;
pub mod train;
