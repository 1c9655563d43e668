//! Central finite differences against the analytic gradients, over the
//! full architecture test matrix.

use dc3do_core::geom::PointCloud;
use dc3do_core::nets::{
    denoiser_loss_and_grad, joint_loss_and_grad, CloudBatchItem, DenoiserDims, DenoiserParams,
    EncoderDims, EncoderParams, LatentBatchItem,
};
use dc3do_core::rng::rng_from;
use dc3do_core::schedule::{make_schedule, NoiseSchedule};
use rand::Rng;

const H: f64 = 1e-5;
const MAX_REL_ERR: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

fn random_latent(rng: &mut rand_chacha::ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn latent_batch(
    rng: &mut rand_chacha::ChaCha8Rng,
    dim: usize,
    t_steps: usize,
    classes: usize,
    n: usize,
) -> Vec<LatentBatchItem> {
    (0..n)
        .map(|i| LatentBatchItem {
            z0: random_latent(rng, dim),
            class: i % classes,
            t: rng.random_range(1..=t_steps),
            eps: random_latent(rng, dim),
        })
        .collect()
}

#[test]
fn denoiser_gradients_match_finite_differences() {
    for &(latent, hidden) in &[(8usize, 16usize), (8, 64), (32, 16), (32, 64)] {
        let t_steps = 40;
        let sched = make_schedule(t_steps, 1e-3, 0.1).unwrap();
        let dims = DenoiserDims {
            latent,
            hidden,
            classes: 3,
            class_embed: 4,
            time_embed: 8,
            t_steps,
        };
        let mut rng = rng_from(100 + latent as u64 * 10 + hidden as u64);
        let mut den = DenoiserParams::init(dims, &mut rng).unwrap();
        let batch = latent_batch(&mut rng, latent, t_steps, 3, 3);
        let (_, grad) = denoiser_loss_and_grad(&den, &sched, &batch).unwrap();
        let analytic: Vec<Vec<f64>> = grad.tensors().iter().map(|t| (*t).clone()).collect();

        let mut worst = 0.0f64;
        for ti in 0..analytic.len() {
            for ci in 0..analytic[ti].len() {
                let orig = den.tensors_mut()[ti][ci];
                den.tensors_mut()[ti][ci] = orig + H;
                let lp = denoiser_loss_and_grad(&den, &sched, &batch).unwrap().0;
                den.tensors_mut()[ti][ci] = orig - H;
                let lm = denoiser_loss_and_grad(&den, &sched, &batch).unwrap().0;
                den.tensors_mut()[ti][ci] = orig;
                let fd = (lp - lm) / (2.0 * H);
                let err = rel_err(fd, analytic[ti][ci]);
                worst = worst.max(err);
                assert!(
                    err <= MAX_REL_ERR,
                    "denoiser D_z={latent} H={hidden} tensor {ti} coord {ci}: fd={fd} analytic={} rel={err}",
                    analytic[ti][ci]
                );
            }
        }
        println!("denoiser D_z={latent} H={hidden}: worst relative error {worst:.3e}");
    }
}

#[test]
fn joint_gradients_match_finite_differences() {
    for &(latent, hidden) in &[(8usize, 16usize), (32, 64)] {
        let t_steps = 40;
        let sched = make_schedule(t_steps, 1e-3, 0.1).unwrap();
        let enc_dims = EncoderDims { hidden, latent };
        let den_dims = DenoiserDims {
            latent,
            hidden,
            classes: 2,
            class_embed: 4,
            time_embed: 8,
            t_steps,
        };
        let mut rng = rng_from(200 + latent as u64 * 10 + hidden as u64);
        let mut enc = EncoderParams::init(enc_dims, &mut rng).unwrap();
        let mut den = DenoiserParams::init(den_dims, &mut rng).unwrap();
        let clouds: Vec<PointCloud> = (0..2)
            .map(|_| {
                PointCloud::new(
                    (0..8)
                        .map(|_| {
                            [
                                rng.random_range(-1.0..1.0),
                                rng.random_range(-1.0..1.0),
                                rng.random_range(-1.0..1.0),
                            ]
                        })
                        .collect(),
                )
            })
            .collect();
        let batch: Vec<CloudBatchItem<'_>> = clouds
            .iter()
            .enumerate()
            .map(|(i, cloud)| CloudBatchItem {
                cloud,
                class: i % 2,
                t: rng.random_range(1..=t_steps),
                eps: random_latent(&mut rng, latent),
            })
            .collect();
        let (_, enc_grad, den_grad) = joint_loss_and_grad(&enc, &den, &sched, &batch).unwrap();
        let enc_analytic: Vec<Vec<f64>> = enc_grad.tensors().iter().map(|t| (*t).clone()).collect();
        let den_analytic: Vec<Vec<f64>> = den_grad.tensors().iter().map(|t| (*t).clone()).collect();

        let loss = |enc: &EncoderParams, den: &DenoiserParams| -> f64 {
            joint_loss_and_grad(enc, den, &sched, &batch).unwrap().0
        };
        let mut worst = 0.0f64;
        for ti in 0..enc_analytic.len() {
            for ci in 0..enc_analytic[ti].len() {
                let orig = enc.tensors_mut()[ti][ci];
                enc.tensors_mut()[ti][ci] = orig + H;
                let lp = loss(&enc, &den);
                enc.tensors_mut()[ti][ci] = orig - H;
                let lm = loss(&enc, &den);
                enc.tensors_mut()[ti][ci] = orig;
                let fd = (lp - lm) / (2.0 * H);
                let err = rel_err(fd, enc_analytic[ti][ci]);
                worst = worst.max(err);
                assert!(
                    err <= MAX_REL_ERR,
                    "encoder D_z={latent} H={hidden} tensor {ti} coord {ci}: fd={fd} analytic={} rel={err}",
                    enc_analytic[ti][ci]
                );
            }
        }
        for ti in 0..den_analytic.len() {
            for ci in 0..den_analytic[ti].len() {
                let orig = den.tensors_mut()[ti][ci];
                den.tensors_mut()[ti][ci] = orig + H;
                let lp = loss(&enc, &den);
                den.tensors_mut()[ti][ci] = orig - H;
                let lm = loss(&enc, &den);
                den.tensors_mut()[ti][ci] = orig;
                let fd = (lp - lm) / (2.0 * H);
                let err = rel_err(fd, den_analytic[ti][ci]);
                worst = worst.max(err);
                assert!(
                    err <= MAX_REL_ERR,
                    "joint-denoiser D_z={latent} H={hidden} tensor {ti} coord {ci}: fd={fd} analytic={} rel={err}",
                    den_analytic[ti][ci]
                );
            }
        }
        println!("joint D_z={latent} H={hidden}: worst relative error {worst:.3e}");
    }
}

/// The quadratic sanity case: a one-hidden-free path where the closed form
/// is trivial. With all trunk weights zero except the output bias, the
/// loss is exactly sum ((b3 - eps)^2)/B and its b3-gradient 2(b3 - eps)/B.
#[test]
fn zeroed_trunk_bias_gradient_is_closed_form() {
    let t_steps = 10;
    let sched = make_schedule(t_steps, 1e-3, 0.1).unwrap();
    let dims = DenoiserDims {
        latent: 3,
        hidden: 4,
        classes: 2,
        class_embed: 2,
        time_embed: 2,
        t_steps,
    };
    let mut rng = rng_from(7);
    let mut den = DenoiserParams::init(dims, &mut rng).unwrap();
    for t in den.tensors_mut() {
        for v in t.iter_mut() {
            *v = 0.0;
        }
    }
    den.b3 = vec![0.3, -0.2, 0.5];
    let batch = vec![LatentBatchItem {
        z0: vec![0.1, 0.2, 0.3],
        class: 0,
        t: 5,
        eps: vec![1.0, -1.0, 0.0],
    }];
    let (loss, grad) = denoiser_loss_and_grad(&den, &sched, &batch).unwrap();
    let expect_loss: f64 = den
        .b3
        .iter()
        .zip(&batch[0].eps)
        .map(|(b, e)| (b - e) * (b - e))
        .sum();
    assert!((loss - expect_loss).abs() < 1e-12);
    for d in 0..3 {
        let expect = 2.0 * (den.b3[d] - batch[0].eps[d]);
        assert!((grad.b3[d] - expect).abs() < 1e-12);
    }
}
