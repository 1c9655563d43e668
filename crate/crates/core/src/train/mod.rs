//! Training loop for the conditional denoiser (optionally jointly with the
//! encoder) and checkpoint persistence.

mod checkpoint;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::nets::{
    denoiser_loss_and_grad, encode, joint_loss_and_grad, CloudBatchItem, DenoiserDims,
    DenoiserParams, EncoderDims, EncoderParams, LatentBatchItem,
};
use crate::rng::rng_for;
use crate::schedule::{make_schedule, NoiseSchedule};

/// Hyperparameters of one training run.
///
/// `validate` is the entry gate used by the CLI; library callers (tests)
/// may construct bypassing values directly, e.g. a zero learning rate to
/// check that parameters stay put.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Adam first/second moment decay.
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Train the encoder jointly (false) or keep it fixed (true).
    pub freeze_encoder: bool,
    /// When true, each example may be conditioned on a complement label
    /// ("not class j", row `n_base + j`) drawn from the other classes.
    pub complement_conditioning: bool,
    /// Record a loss-trace point every this many steps.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            freeze_encoder: false,
            complement_conditioning: false,
            log_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 || self.log_every == 0 {
            return Err(Error::InvalidArgument(
                "steps, batch_size, and log_every must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "learning_rate must be > 0".into(),
            ));
        }
        for (name, m) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer with bias correction.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    steps_taken: usize,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig, tensor_sizes: &[usize]) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            steps_taken: 0,
            m: tensor_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: tensor_sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    /// Apply one update. `params` and `grads` must match the sizes given at
    /// construction, in the same order. Updated values are snapped to f32
    /// precision (the model's storage precision).
    pub fn step(&mut self, params: &mut [&mut Vec<f64>], grads: &[&Vec<f64>]) {
        self.steps_taken += 1;
        let t = self.steps_taken as i32;
        let scale = self.lr * (1.0 - self.beta2.powi(t)).sqrt() / (1.0 - self.beta1.powi(t));
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(&mut self.v))
        {
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                p[k] = crate::nets::snap(p[k] - scale * m[k] / (v[k].sqrt() + self.eps));
            }
        }
    }
}

/// A trained (or initialized) model: optional encoder, conditional
/// denoiser, and the schedule it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub encoder: Option<EncoderParams>,
    pub denoiser: DenoiserParams,
    pub schedule: NoiseSchedule,
}

/// Dimensions and schedule range needed to initialize a model.
#[derive(Debug, Clone, Copy)]
pub struct ModelSpec {
    pub encoder: Option<EncoderDims>,
    pub denoiser: DenoiserDims,
    pub beta_min: f64,
    pub beta_max: f64,
}

/// Initialize a model with seeded Xavier-uniform weights. Draw order:
/// encoder tensors (when present), then denoiser tensors.
pub fn init_model(spec: &ModelSpec, seed: u64) -> Result<ModelParameters> {
    if let Some(enc) = spec.encoder {
        if enc.latent != spec.denoiser.latent {
            return Err(Error::DimensionMismatch(format!(
                "encoder latent {} vs denoiser latent {}",
                enc.latent, spec.denoiser.latent
            )));
        }
    }
    let schedule = make_schedule(spec.denoiser.t_steps, spec.beta_min, spec.beta_max)?;
    let mut rng = rng_for(seed, "init");
    let encoder = spec
        .encoder
        .map(|d| EncoderParams::init(d, &mut rng))
        .transpose()?;
    let denoiser = DenoiserParams::init(spec.denoiser, &mut rng)?;
    Ok(ModelParameters {
        encoder,
        denoiser,
        schedule,
    })
}

/// One recorded point of the loss trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub step: usize,
    pub loss: f64,
}

/// Number of base (non-complement) classes the labels refer to.
fn base_classes(den: &DenoiserParams, complement: bool) -> Result<usize> {
    let c = den.dims.classes;
    if complement {
        if c % 2 != 0 || c < 4 {
            return Err(Error::InvalidArgument(format!(
                "complement conditioning needs an even class count >= 4, got {c}"
            )));
        }
        Ok(c / 2)
    } else {
        Ok(c)
    }
}

fn check_labels<T>(data: &[(T, usize)], n_base: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut seen = vec![false; n_base];
    for (_, label) in data {
        if *label >= n_base {
            return Err(Error::UnknownClass {
                id: *label,
                total: n_base,
            });
        }
        seen[*label] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidArgument(format!(
            "class {missing} has zero training samples"
        )));
    }
    Ok(())
}

/// Per-example draws, in documented order: index, conditioning label,
/// timestep, then the noise vector.
fn draw_example(
    rng: &mut ChaCha8Rng,
    n_data: usize,
    labels: impl Fn(usize) -> usize,
    n_base: usize,
    complement: bool,
    t_steps: usize,
    dim: usize,
) -> (usize, usize, usize, Vec<f64>) {
    let idx = rng.random_range(0..n_data);
    let true_label = labels(idx);
    let cond = if complement && rng.random::<bool>() {
        // Complement row n_base + j is trained on samples of classes != j.
        let offset = rng.random_range(1..n_base);
        n_base + (true_label + offset) % n_base
    } else {
        true_label
    };
    let t = rng.random_range(1..=t_steps);
    let eps: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    (idx, cond, t, eps)
}

fn record(trace: &mut Vec<TracePoint>, step: usize, steps: usize, log_every: usize, loss: f64) {
    if (step - 1) % log_every == 0 || step == steps {
        trace.push(TracePoint { step, loss });
    }
}

/// Train the denoiser on precomputed latent vectors.
pub fn train_denoiser(
    mut den: DenoiserParams,
    sched: &NoiseSchedule,
    data: &[(Vec<f64>, usize)],
    cfg: &TrainConfig,
) -> Result<(DenoiserParams, Vec<TracePoint>)> {
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    let n_base = base_classes(&den, cfg.complement_conditioning)?;
    check_labels(data, n_base)?;
    if cfg.complement_conditioning && n_base < 2 {
        return Err(Error::InvalidArgument(
            "complement conditioning needs >= 2 base classes".into(),
        ));
    }
    let dim = den.dims.latent;
    for (z, _) in data {
        if z.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "latent of {} coordinates in a {dim}-dim model",
                z.len()
            )));
        }
    }
    let mut rng = rng_for(cfg.seed, "train");
    let mut adam = Adam::new(cfg, &den.tensors().map(|(_, t)| t.len()));
    let mut trace = Vec::new();
    for step in 1..=cfg.steps {
        let batch: Vec<LatentBatchItem> = (0..cfg.batch_size)
            .map(|_| {
                let (idx, cond, t, eps) = draw_example(
                    &mut rng,
                    data.len(),
                    |i| data[i].1,
                    n_base,
                    cfg.complement_conditioning,
                    sched.len(),
                    dim,
                );
                LatentBatchItem {
                    z0: data[idx].0.clone(),
                    class: cond,
                    t,
                    eps,
                }
            })
            .collect();
        let (loss, grad) = denoiser_loss_and_grad(&den, sched, &batch)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step, loss });
        }
        adam.step(&mut den.tensors_mut(), &grad.tensors());
        record(&mut trace, step, cfg.steps, cfg.log_every, loss);
    }
    Ok((den, trace))
}

/// Train encoder and denoiser end to end on labeled point clouds.
///
/// With `freeze_encoder` the pointwise features stay fixed: the encoder's
/// output layer is first standardized over the training clouds (folded in
/// place, see [`crate::nets::standardize_encoder`]), the clouds are
/// encoded once, and only the denoiser is updated.
pub fn train_joint(
    mut enc: EncoderParams,
    den: DenoiserParams,
    sched: &NoiseSchedule,
    data: &[(PointCloud, usize)],
    cfg: &TrainConfig,
) -> Result<(EncoderParams, DenoiserParams, Vec<TracePoint>)> {
    if cfg.freeze_encoder {
        let clouds: Vec<&PointCloud> = data.iter().map(|(pc, _)| pc).collect();
        crate::nets::standardize_encoder(&mut enc, &clouds)?;
        let latents: Vec<(Vec<f64>, usize)> = data
            .iter()
            .map(|(pc, label)| Ok((encode(&enc, pc)?, *label)))
            .collect::<Result<_>>()?;
        let (den, trace) = train_denoiser(den, sched, &latents, cfg)?;
        return Ok((enc, den, trace));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    let mut den = den;
    let n_base = base_classes(&den, cfg.complement_conditioning)?;
    check_labels(data, n_base)?;
    let dim = den.dims.latent;
    let mut rng = rng_for(cfg.seed, "train");
    let sizes: Vec<usize> = enc
        .tensors()
        .iter()
        .map(|(_, t)| t.len())
        .chain(den.tensors().iter().map(|(_, t)| t.len()))
        .collect();
    let mut adam = Adam::new(cfg, &sizes);
    let mut trace = Vec::new();
    for step in 1..=cfg.steps {
        let batch: Vec<CloudBatchItem<'_>> = (0..cfg.batch_size)
            .map(|_| {
                let (idx, cond, t, eps) = draw_example(
                    &mut rng,
                    data.len(),
                    |i| data[i].1,
                    n_base,
                    cfg.complement_conditioning,
                    sched.len(),
                    dim,
                );
                CloudBatchItem {
                    cloud: &data[idx].0,
                    class: cond,
                    t,
                    eps,
                }
            })
            .collect();
        let (loss, enc_grad, den_grad) = joint_loss_and_grad(&enc, &den, sched, &batch)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step, loss });
        }
        let mut params: Vec<&mut Vec<f64>> = Vec::with_capacity(13);
        params.extend(enc.tensors_mut());
        params.extend(den.tensors_mut());
        let grads: Vec<&Vec<f64>> = enc_grad
            .tensors()
            .into_iter()
            .chain(den_grad.tensors())
            .collect();
        adam.step(&mut params, &grads);
        record(&mut trace, step, cfg.steps, cfg.log_every, loss);
    }
    Ok((enc, den, trace))
}
