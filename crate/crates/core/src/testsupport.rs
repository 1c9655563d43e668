//! Oracle denoisers shared by unit tests.

use std::cell::Cell;

use crate::error::Result;
use crate::schedule::{ConditionalDenoiser, NoiseSchedule};

/// Knows the true `z0`, so it can recover the injected noise exactly when
/// conditioned on `target`; returns zero for any other class.
pub(crate) struct KnownZ0Denoiser {
    pub z0: Vec<f64>,
    pub target: usize,
    pub sched: NoiseSchedule,
    pub classes: usize,
}

impl ConditionalDenoiser for KnownZ0Denoiser {
    fn latent_dim(&self) -> usize {
        self.z0.len()
    }
    fn num_classes(&self) -> usize {
        self.classes
    }
    fn denoise(&self, z_t: &[f64], t: usize, class: usize) -> Result<Vec<f64>> {
        if class == self.target {
            let (a, s) = (self.sched.alpha(t), self.sched.sigma(t));
            Ok(z_t
                .iter()
                .zip(&self.z0)
                .map(|(zt, z0)| (zt - a * z0) / s)
                .collect())
        } else {
            Ok(vec![0.0; self.z0.len()])
        }
    }
}

/// Returns a fixed vector per class, ignoring its input.
pub(crate) struct ConstantDenoiser {
    pub outputs: Vec<Vec<f64>>,
}

impl ConditionalDenoiser for ConstantDenoiser {
    fn latent_dim(&self) -> usize {
        self.outputs[0].len()
    }
    fn num_classes(&self) -> usize {
        self.outputs.len()
    }
    fn denoise(&self, _z_t: &[f64], _t: usize, class: usize) -> Result<Vec<f64>> {
        Ok(self.outputs[class].clone())
    }
}

/// Wraps a denoiser and counts evaluations.
pub(crate) struct CountingDenoiser<D: ConditionalDenoiser> {
    inner: D,
    count: Cell<usize>,
}

impl<D: ConditionalDenoiser> CountingDenoiser<D> {
    pub fn new(inner: D) -> Self {
        Self {
            inner,
            count: Cell::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.count.get()
    }
}

impl<D: ConditionalDenoiser> ConditionalDenoiser for CountingDenoiser<D> {
    fn latent_dim(&self) -> usize {
        self.inner.latent_dim()
    }
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }
    fn denoise(&self, z_t: &[f64], t: usize, class: usize) -> Result<Vec<f64>> {
        self.count.set(self.count.get() + 1);
        self.inner.denoise(z_t, t, class)
    }
}
