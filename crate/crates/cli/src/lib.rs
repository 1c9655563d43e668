//! Experiment harness: dataset generation, training, classification,
//! evaluation, depth rendering, and the resolution/view-count ablation.

pub mod commands {
    pub mod ablate;
    pub mod classify;
    pub mod eval;
    pub mod gen_data;
    pub mod render;
    pub mod train;
}

pub mod common;
pub mod config;
pub mod manifest;
pub mod scoring;
