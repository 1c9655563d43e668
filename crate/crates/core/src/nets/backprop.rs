//! Hand-derived reverse-mode gradients for the encoder and denoiser.

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::nets::{affine, tanh_inplace, DenoiserParams, EncoderParams};
use crate::schedule::{forward_diffuse, NoiseSchedule};

/// Gradient of the denoiser parameters; shape-congruent with
/// [`DenoiserParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserGrad {
    pub embed: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

impl DenoiserGrad {
    pub fn zeros(p: &DenoiserParams) -> Self {
        Self {
            embed: vec![0.0; p.embed.len()],
            w1: vec![0.0; p.w1.len()],
            b1: vec![0.0; p.b1.len()],
            w2: vec![0.0; p.w2.len()],
            b2: vec![0.0; p.b2.len()],
            w3: vec![0.0; p.w3.len()],
            b3: vec![0.0; p.b3.len()],
        }
    }

    /// Tensor views in the same order as [`DenoiserParams::tensors`].
    pub fn tensors(&self) -> [&Vec<f64>; 7] {
        [
            &self.embed,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
            &self.w3,
            &self.b3,
        ]
    }
}

/// Gradient of the encoder parameters; shape-congruent with
/// [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrad {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

impl EncoderGrad {
    pub fn zeros(p: &EncoderParams) -> Self {
        Self {
            w1: vec![0.0; p.w1.len()],
            b1: vec![0.0; p.b1.len()],
            w2: vec![0.0; p.w2.len()],
            b2: vec![0.0; p.b2.len()],
            w3: vec![0.0; p.w3.len()],
            b3: vec![0.0; p.b3.len()],
        }
    }

    /// Tensor views in the same order as [`EncoderParams::tensors`].
    pub fn tensors(&self) -> [&Vec<f64>; 6] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }
}

/// Gradient of a full model (encoder optional).
#[derive(Debug, Clone)]
pub struct Gradient {
    pub encoder: Option<EncoderGrad>,
    pub denoiser: DenoiserGrad,
}

/// g += dy (outer) x, for g of shape `dy.len() x x.len()` row-major.
fn outer_acc(g: &mut [f64], dy: &[f64], x: &[f64]) {
    let in_dim = x.len();
    for (o, d) in dy.iter().enumerate() {
        let row = &mut g[o * in_dim..(o + 1) * in_dim];
        for (gi, xi) in row.iter_mut().zip(x) {
            *gi += d * xi;
        }
    }
}

/// dx = W^T dy for row-major `w` of shape `dy.len() x in_dim`.
fn matvec_transpose(w: &[f64], dy: &[f64], in_dim: usize) -> Vec<f64> {
    let mut dx = vec![0.0; in_dim];
    for (o, d) in dy.iter().enumerate() {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        for (xi, wi) in dx.iter_mut().zip(row) {
            *xi += d * wi;
        }
    }
    dx
}

fn acc(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Chain through h = tanh(a): d *= 1 - h^2.
fn tanh_backward(d: &mut [f64], h: &[f64]) {
    for (di, hi) in d.iter_mut().zip(h) {
        *di *= 1.0 - hi * hi;
    }
}

struct DenoiserCache {
    v: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    out: Vec<f64>,
}

fn denoiser_forward_cached(
    den: &DenoiserParams,
    z_t: &[f64],
    t: usize,
    class: usize,
) -> Result<DenoiserCache> {
    let v = super::denoiser_input(den, z_t, t, class)?;
    let mut h1 = affine(&den.w1, &den.b1, &v);
    tanh_inplace(&mut h1);
    let mut h2 = affine(&den.w2, &den.b2, &h1);
    tanh_inplace(&mut h2);
    let out = affine(&den.w3, &den.b3, &h2);
    Ok(DenoiserCache { v, h1, h2, out })
}

/// Accumulate parameter gradients for one denoiser evaluation; returns the
/// gradient with respect to z_t.
fn denoiser_backward(
    den: &DenoiserParams,
    cache: &DenoiserCache,
    class: usize,
    dout: &[f64],
    grad: &mut DenoiserGrad,
) -> Vec<f64> {
    let d = &den.dims;
    outer_acc(&mut grad.w3, dout, &cache.h2);
    acc(&mut grad.b3, dout);
    let mut dh2 = matvec_transpose(&den.w3, dout, d.hidden);
    tanh_backward(&mut dh2, &cache.h2);
    outer_acc(&mut grad.w2, &dh2, &cache.h1);
    acc(&mut grad.b2, &dh2);
    let mut dh1 = matvec_transpose(&den.w2, &dh2, d.hidden);
    tanh_backward(&mut dh1, &cache.h1);
    outer_acc(&mut grad.w1, &dh1, &cache.v);
    acc(&mut grad.b1, &dh1);
    let dv = matvec_transpose(&den.w1, &dh1, d.input_dim());
    // Split dv: z_t part returns to the caller, the class-embedding part
    // lands in the table row; the time embedding is fixed.
    let embed_from = d.latent + d.time_embed;
    let row = &mut grad.embed[class * d.class_embed..(class + 1) * d.class_embed];
    acc(row, &dv[embed_from..]);
    dv[..d.latent].to_vec()
}

struct EncoderCache {
    /// Per-point hidden activations, n x hidden each.
    h1: Vec<f64>,
    h2: Vec<f64>,
    /// Winning point per latent coordinate (lowest index on ties).
    argmax: Vec<usize>,
    z0: Vec<f64>,
}

fn encoder_forward_cached(enc: &EncoderParams, pc: &PointCloud) -> Result<EncoderCache> {
    if pc.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    let h = enc.dims.hidden;
    let dl = enc.dims.latent;
    let n = pc.len();
    let mut h1_all = Vec::with_capacity(n * h);
    let mut h2_all = Vec::with_capacity(n * h);
    let mut argmax = vec![0usize; dl];
    let mut z0 = vec![f64::NEG_INFINITY; dl];
    for (i, p) in pc.points.iter().enumerate() {
        let mut h1 = affine(&enc.w1, &enc.b1, p);
        tanh_inplace(&mut h1);
        let mut h2 = affine(&enc.w2, &enc.b2, &h1);
        tanh_inplace(&mut h2);
        let y = affine(&enc.w3, &enc.b3, &h2);
        for (d, yd) in y.iter().enumerate() {
            if *yd > z0[d] {
                z0[d] = *yd;
                argmax[d] = i;
            }
        }
        h1_all.extend_from_slice(&h1);
        h2_all.extend_from_slice(&h2);
    }
    Ok(EncoderCache {
        h1: h1_all,
        h2: h2_all,
        argmax,
        z0,
    })
}

/// Accumulate encoder gradients. Max pooling routes each latent
/// coordinate's gradient to its winning point.
fn encoder_backward(
    enc: &EncoderParams,
    pc: &PointCloud,
    cache: &EncoderCache,
    dz0: &[f64],
    grad: &mut EncoderGrad,
) {
    let h = enc.dims.hidden;
    let dl = enc.dims.latent;
    // Sparse per-point output gradients: only winners receive signal.
    let mut per_point: std::collections::BTreeMap<usize, Vec<f64>> = std::collections::BTreeMap::new();
    for d in 0..dl {
        if dz0[d] != 0.0 {
            per_point
                .entry(cache.argmax[d])
                .or_insert_with(|| vec![0.0; dl])[d] += dz0[d];
        }
    }
    for (i, dy) in per_point {
        let h1 = &cache.h1[i * h..(i + 1) * h];
        let h2 = &cache.h2[i * h..(i + 1) * h];
        outer_acc(&mut grad.w3, &dy, h2);
        acc(&mut grad.b3, &dy);
        let mut dh2 = matvec_transpose(&enc.w3, &dy, h);
        tanh_backward(&mut dh2, h2);
        outer_acc(&mut grad.w2, &dh2, h1);
        acc(&mut grad.b2, &dh2);
        let mut dh1 = matvec_transpose(&enc.w2, &dh2, h);
        tanh_backward(&mut dh1, h1);
        outer_acc(&mut grad.w1, &dh1, &pc.points[i]);
        acc(&mut grad.b1, &dh1);
    }
}

/// One training example over a precomputed latent.
#[derive(Debug, Clone)]
pub struct LatentBatchItem {
    pub z0: Vec<f64>,
    pub class: usize,
    pub t: usize,
    pub eps: Vec<f64>,
}

/// One training example over a raw point cloud (encoder in the loop).
#[derive(Debug, Clone)]
pub struct CloudBatchItem<'a> {
    pub cloud: &'a PointCloud,
    pub class: usize,
    pub t: usize,
    pub eps: Vec<f64>,
}

fn check_sched(den: &DenoiserParams, sched: &NoiseSchedule) -> Result<()> {
    if sched.len() != den.dims.t_steps {
        return Err(Error::InvalidArgument(format!(
            "schedule length {} does not match denoiser t_steps {}",
            sched.len(),
            den.dims.t_steps
        )));
    }
    Ok(())
}

/// Mean noise-prediction loss over a latent batch and its exact gradient.
pub fn denoiser_loss_and_grad(
    den: &DenoiserParams,
    sched: &NoiseSchedule,
    batch: &[LatentBatchItem],
) -> Result<(f64, DenoiserGrad)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    check_sched(den, sched)?;
    let b = batch.len() as f64;
    let mut grad = DenoiserGrad::zeros(den);
    let mut loss_sum = 0.0;
    for item in batch {
        let z_t = forward_diffuse(&item.z0, item.t, &item.eps, sched)?;
        let cache = denoiser_forward_cached(den, &z_t, item.t, item.class)?;
        let mut dout = Vec::with_capacity(cache.out.len());
        for (o, e) in cache.out.iter().zip(&item.eps) {
            let r = o - e;
            loss_sum += r * r;
            dout.push(2.0 * r / b);
        }
        denoiser_backward(den, &cache, item.class, &dout, &mut grad);
    }
    Ok((loss_sum / b, grad))
}

/// Mean noise-prediction loss over a cloud batch with the encoder in the
/// loop, plus exact gradients for both parameter sets.
pub fn joint_loss_and_grad(
    enc: &EncoderParams,
    den: &DenoiserParams,
    sched: &NoiseSchedule,
    batch: &[CloudBatchItem<'_>],
) -> Result<(f64, EncoderGrad, DenoiserGrad)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    check_sched(den, sched)?;
    if enc.dims.latent != den.dims.latent {
        return Err(Error::DimensionMismatch(format!(
            "encoder latent {} vs denoiser latent {}",
            enc.dims.latent, den.dims.latent
        )));
    }
    let b = batch.len() as f64;
    let mut den_grad = DenoiserGrad::zeros(den);
    let mut enc_grad = EncoderGrad::zeros(enc);
    let mut loss_sum = 0.0;
    for item in batch {
        let enc_cache = encoder_forward_cached(enc, item.cloud)?;
        let z_t = forward_diffuse(&enc_cache.z0, item.t, &item.eps, sched)?;
        let den_cache = denoiser_forward_cached(den, &z_t, item.t, item.class)?;
        let mut dout = Vec::with_capacity(den_cache.out.len());
        for (o, e) in den_cache.out.iter().zip(&item.eps) {
            let r = o - e;
            loss_sum += r * r;
            dout.push(2.0 * r / b);
        }
        let dz_t = denoiser_backward(den, &den_cache, item.class, &dout, &mut den_grad);
        // z_t = alpha_t z0 + sigma_t eps, so dz0 = alpha_t dz_t.
        let a_t = sched.alpha(item.t);
        let dz0: Vec<f64> = dz_t.iter().map(|d| a_t * d).collect();
        encoder_backward(enc, item.cloud, &enc_cache, &dz0, &mut enc_grad);
    }
    Ok((loss_sum / b, enc_grad, den_grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{DenoiserDims, EncoderDims};
    use crate::rng::rng_from;
    use crate::schedule::make_schedule;
    use rand::Rng;

    /// Closed-form check of the linear-layer primitives: for
    /// L = ||W x + b - y||^2, dW = 2 r x^T, db = 2 r, dx = 2 W^T r.
    #[test]
    fn linear_layer_matches_closed_form() {
        let w = vec![0.5, -0.3, 0.2, 0.8, 0.1, -0.6]; // 2 x 3
        let b = vec![0.1, -0.2];
        let x = vec![1.5, -2.0, 0.7];
        let y = vec![0.4, 0.9];
        let out = affine(&w, &b, &x);
        let r: Vec<f64> = out.iter().zip(&y).map(|(o, t)| o - t).collect();
        let dout: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        let mut gw = vec![0.0; 6];
        outer_acc(&mut gw, &dout, &x);
        let dx = matvec_transpose(&w, &dout, 3);
        for o in 0..2 {
            for i in 0..3 {
                let expect = 2.0 * r[o] * x[i];
                assert!((gw[o * 3 + i] - expect).abs() < 1e-12);
            }
        }
        for i in 0..3 {
            let expect = 2.0 * (w[i] * r[0] + w[3 + i] * r[1]);
            assert!((dx[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_rejects_empty_batch() {
        let den = DenoiserParams::init(
            DenoiserDims {
                latent: 2,
                hidden: 4,
                classes: 2,
                class_embed: 2,
                time_embed: 2,
                t_steps: 5,
            },
            &mut rng_from(1),
        )
        .unwrap();
        let sched = make_schedule(5, 1e-3, 0.2).unwrap();
        assert!(matches!(
            denoiser_loss_and_grad(&den, &sched, &[]),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn batch_of_identical_samples_equals_single_sample_gradient() {
        let den = DenoiserParams::init(
            DenoiserDims {
                latent: 3,
                hidden: 5,
                classes: 2,
                class_embed: 2,
                time_embed: 4,
                t_steps: 8,
            },
            &mut rng_from(2),
        )
        .unwrap();
        let sched = make_schedule(8, 1e-3, 0.2).unwrap();
        let item = LatentBatchItem {
            z0: vec![0.3, -0.8, 0.5],
            class: 1,
            t: 4,
            eps: vec![0.9, -0.1, 0.2],
        };
        let (l1, g1) = denoiser_loss_and_grad(&den, &sched, &[item.clone()]).unwrap();
        // Four copies keep the 1/B scaling dyadic, so equality is exact.
        let batch = vec![item.clone(), item.clone(), item.clone(), item];
        let (l4, g4) = denoiser_loss_and_grad(&den, &sched, &batch).unwrap();
        assert_eq!(l1, l4);
        assert_eq!(g1, g4);
    }

    #[test]
    fn unused_class_row_gets_zero_gradient() {
        let den = DenoiserParams::init(
            DenoiserDims {
                latent: 2,
                hidden: 4,
                classes: 3,
                class_embed: 2,
                time_embed: 2,
                t_steps: 5,
            },
            &mut rng_from(3),
        )
        .unwrap();
        let sched = make_schedule(5, 1e-3, 0.2).unwrap();
        let batch = vec![LatentBatchItem {
            z0: vec![0.1, 0.2],
            class: 1,
            t: 2,
            eps: vec![-0.4, 0.6],
        }];
        let (_, g) = denoiser_loss_and_grad(&den, &sched, &batch).unwrap();
        assert!(g.embed[0..2].iter().all(|&v| v == 0.0));
        assert!(g.embed[4..6].iter().all(|&v| v == 0.0));
        assert!(g.embed[2..4].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn joint_loss_runs_and_produces_nonzero_gradients() {
        let enc = EncoderParams::init(
            EncoderDims {
                hidden: 4,
                latent: 3,
            },
            &mut rng_from(4),
        )
        .unwrap();
        let den = DenoiserParams::init(
            DenoiserDims {
                latent: 3,
                hidden: 5,
                classes: 2,
                class_embed: 2,
                time_embed: 2,
                t_steps: 6,
            },
            &mut rng_from(5),
        )
        .unwrap();
        let sched = make_schedule(6, 1e-3, 0.2).unwrap();
        let mut rng = rng_from(6);
        let cloud = PointCloud::new(
            (0..10)
                .map(|_| {
                    [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ]
                })
                .collect(),
        );
        let batch = vec![CloudBatchItem {
            cloud: &cloud,
            class: 0,
            t: 3,
            eps: vec![0.5, -0.2, 0.8],
        }];
        let (loss, eg, dg) = joint_loss_and_grad(&enc, &den, &sched, &batch).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
        assert!(eg.w1.iter().any(|&v| v != 0.0));
        assert!(dg.w1.iter().any(|&v| v != 0.0));
    }
}
