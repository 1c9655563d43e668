//! Class-conditional latent diffusion for 3D shape classification.
//!
//! The pipeline: sample or ingest point clouds ([`geom`]), encode them into
//! global latent vectors ([`nets`]), diffuse and denoise under a
//! variance-preserving schedule ([`schedule`]), train the conditional
//! denoiser ([`train`]), and classify by comparing per-class noise
//! reconstruction losses ([`classify`]). A depth-render multi-view pathway
//! ([`views`]) provides the image-space baseline, and [`metrics`] does the
//! accuracy accounting.

pub mod classify;
pub mod error;
pub mod geom;
pub mod metrics;
pub mod nets;
pub mod rng;
pub mod schedule;
pub mod train;
pub mod views;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testsupport;
