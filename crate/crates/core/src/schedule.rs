//! Noise schedule, forward diffusion, noise-prediction loss, and ancestral
//! sampling.
//!
//! The forward process is variance preserving: `z_t = alpha_t z_0 +
//! sigma_t eps` with `alpha_t^2 + sigma_t^2 = 1`. Coefficients come from a
//! linear beta ramp, `alpha_t = sqrt(prod_{s<=t} (1 - beta_s))`.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Per-timestep forward-process coefficients for t in 1..=T.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha: Vec<f64>,
    sigma: Vec<f64>,
    beta_min: f64,
    beta_max: f64,
}

impl NoiseSchedule {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Signal coefficient at 1-based timestep `t`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// Noise coefficient at 1-based timestep `t`.
    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t - 1]
    }

    pub fn beta_range(&self) -> (f64, f64) {
        (self.beta_min, self.beta_max)
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.len() {
            return Err(Error::InvalidArgument(format!(
                "timestep {t} outside 1..={}",
                self.len()
            )));
        }
        Ok(())
    }

    /// True when the endpoints are in the classically useful regime:
    /// alpha_1 >= 0.99 (first step nearly clean) and alpha_T <= 0.1
    /// (last step nearly pure noise). Holds for the default
    /// T=1000, beta in [1e-4, 0.02] ramp; short schedules need not satisfy it.
    pub fn is_well_conditioned(&self) -> bool {
        self.alpha[0] >= 0.99 && *self.alpha.last().unwrap() <= 0.1
    }
}

/// Build a linear-beta schedule of `t_steps` steps.
///
/// `beta_t` ramps linearly from `beta_min` to `beta_max` (a single-step
/// schedule uses `beta_min`). Construction asserts the variance-preserving
/// identity and strict decrease of alpha.
pub fn make_schedule(t_steps: usize, beta_min: f64, beta_max: f64) -> Result<NoiseSchedule> {
    if t_steps == 0 {
        return Err(Error::InvalidArgument("schedule needs T >= 1".into()));
    }
    if !(beta_min > 0.0) || !(beta_max < 1.0) || beta_min > beta_max {
        return Err(Error::InvalidArgument(format!(
            "beta range ({beta_min}, {beta_max}) must satisfy 0 < beta_min <= beta_max < 1"
        )));
    }
    let mut alpha = Vec::with_capacity(t_steps);
    let mut sigma = Vec::with_capacity(t_steps);
    let mut alpha_bar = 1.0;
    for t in 0..t_steps {
        let frac = if t_steps == 1 {
            0.0
        } else {
            t as f64 / (t_steps - 1) as f64
        };
        let beta = beta_min + (beta_max - beta_min) * frac;
        alpha_bar *= 1.0 - beta;
        alpha.push(alpha_bar.sqrt());
        sigma.push((1.0 - alpha_bar).sqrt());
    }
    for t in 0..t_steps {
        let vp = alpha[t] * alpha[t] + sigma[t] * sigma[t];
        assert!((vp - 1.0).abs() < 1e-9, "variance not preserved at t={}", t + 1);
        if t > 0 {
            assert!(alpha[t] < alpha[t - 1], "alpha not strictly decreasing");
        }
    }
    Ok(NoiseSchedule {
        alpha,
        sigma,
        beta_min,
        beta_max,
    })
}

/// `alpha_t z0 + sigma_t eps`, exactly.
pub fn forward_diffuse(
    z0: &[f64],
    t: usize,
    eps: &[f64],
    sched: &NoiseSchedule,
) -> Result<Vec<f64>> {
    sched.check_t(t)?;
    if z0.len() != eps.len() {
        return Err(Error::DimensionMismatch(format!(
            "z0 has {} coordinates, eps has {}",
            z0.len(),
            eps.len()
        )));
    }
    let (a, s) = (sched.alpha(t), sched.sigma(t));
    Ok(z0.iter().zip(eps).map(|(z, e)| a * z + s * e).collect())
}

/// A class-conditional noise predictor.
pub trait ConditionalDenoiser {
    /// Dimension of the vectors it denoises.
    fn latent_dim(&self) -> usize;
    /// Number of conditioning labels (including any complement labels).
    fn num_classes(&self) -> usize;
    /// Predict the noise in `z_t` at timestep `t` under class `class`.
    fn denoise(&self, z_t: &[f64], t: usize, class: usize) -> Result<Vec<f64>>;
}

/// Squared-error noise-prediction loss for one `(z0, class, t, eps)` draw:
/// `|| eps - denoise(alpha_t z0 + sigma_t eps, t, class) ||^2`.
///
/// The sum over coordinates is not normalized by dimension; per-class
/// scores built from it are averaged over trials only.
pub fn eps_loss(
    denoiser: &dyn ConditionalDenoiser,
    z0: &[f64],
    class: usize,
    t: usize,
    eps: &[f64],
    sched: &NoiseSchedule,
) -> Result<f64> {
    let z_t = forward_diffuse(z0, t, eps, sched)?;
    let pred = denoiser.denoise(&z_t, t, class)?;
    if pred.len() != eps.len() {
        return Err(Error::DimensionMismatch(format!(
            "denoiser returned {} coordinates for {}-dim noise",
            pred.len(),
            eps.len()
        )));
    }
    Ok(eps
        .iter()
        .zip(&pred)
        .map(|(e, p)| (e - p) * (e - p))
        .sum())
}

/// Evenly spaced decreasing timestep subset including T:
/// `round(T * k / n_steps)` for k = n_steps..=1, deduplicated and floored
/// at 1. With `n_steps == T` this visits every timestep exactly once.
pub fn timestep_subset(t_steps: usize, n_steps: usize) -> Result<Vec<usize>> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be >= 1".into()));
    }
    if n_steps > t_steps {
        return Err(Error::InvalidArgument(format!(
            "n_steps {n_steps} exceeds schedule length {t_steps}"
        )));
    }
    let mut out = Vec::with_capacity(n_steps);
    for k in (1..=n_steps).rev() {
        let t = ((t_steps * k) as f64 / n_steps as f64).round() as usize;
        let t = t.max(1);
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Ancestral sampling of the learned reverse chain, conditioned on `class`.
///
/// Starts from standard normal `z_T` and walks the timestep subset
/// downward. For a hop from `t` to `s` the update is the standard
/// posterior form, written with the variance-preserving coefficients:
///
/// ```text
/// x0_hat = (z_t - sigma_t eps_hat) / alpha_t
/// tau^2  = (sigma_s/sigma_t)^2 * (1 - (alpha_t/alpha_s)^2)   (0 when s = 0)
/// z_s    = alpha_s x0_hat + sqrt(sigma_s^2 - tau^2) eps_hat + tau xi
/// ```
///
/// where `xi` is fresh standard normal noise and (alpha_0, sigma_0) =
/// (1, 0), so the final hop returns `x0_hat`.
pub fn reverse_sample(
    denoiser: &dyn ConditionalDenoiser,
    class: usize,
    sched: &NoiseSchedule,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let subset = timestep_subset(sched.len(), n_steps)?;
    let dim = denoiser.latent_dim();
    let mut rng = rng_from(seed);
    let normal = StandardNormal;
    let mut z: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
    for (i, &t) in subset.iter().enumerate() {
        let s = subset.get(i + 1).copied().unwrap_or(0);
        let eps_hat = denoiser.denoise(&z, t, class)?;
        if eps_hat.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "denoiser returned {} coordinates, expected {dim}",
                eps_hat.len()
            )));
        }
        let (a_t, s_t) = (sched.alpha(t), sched.sigma(t));
        let (a_s, s_s) = if s == 0 {
            (1.0, 0.0)
        } else {
            (sched.alpha(s), sched.sigma(s))
        };
        let tau2 = if s == 0 {
            0.0
        } else {
            (s_s / s_t).powi(2) * (1.0 - (a_t / a_s).powi(2))
        };
        let tau = tau2.max(0.0).sqrt();
        let dir = (s_s * s_s - tau2).max(0.0).sqrt();
        for d in 0..dim {
            let x0_hat = (z[d] - s_t * eps_hat[d]) / a_t;
            let xi: f64 = if tau > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            z[d] = a_s * x0_hat + dir * eps_hat[d] + tau * xi;
        }
    }
    Ok(z)
}
