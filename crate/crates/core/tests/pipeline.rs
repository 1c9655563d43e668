//! End-to-end self-consistency of the latent diffusion pathway: train a
//! conditional denoiser on clustered latents, sample from each class, and
//! check that the classifier recovers the conditioning class.

use dc3do_core::classify::classify_latent;
use dc3do_core::nets::DenoiserDims;
use dc3do_core::rng::{derive_seed, rng_from};
use dc3do_core::schedule::reverse_sample;
use dc3do_core::train::{init_model, train_denoiser, ModelSpec, TrainConfig};
use rand::Rng;

fn clustered_latents(
    seed: u64,
    dim: usize,
    classes: usize,
    per_class: usize,
) -> Vec<(Vec<f64>, usize)> {
    let mut rng = rng_from(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let mut data = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let z: Vec<f64> = center
                .iter()
                .map(|&m| m + rng.random_range(-0.2..0.2))
                .collect();
            data.push((z, c));
        }
    }
    data
}

#[test]
fn generated_latents_classify_as_their_conditioning_class() {
    let dim = 8;
    let t_steps = 100;
    let spec = ModelSpec {
        encoder: None,
        denoiser: DenoiserDims {
            latent: dim,
            hidden: 64,
            classes: 3,
            class_embed: 8,
            time_embed: 8,
            t_steps,
        },
        beta_min: 1e-4,
        beta_max: 0.05,
    };
    let model = init_model(&spec, 31).unwrap();
    let data = clustered_latents(32, dim, 3, 30);
    let cfg = TrainConfig {
        steps: 800,
        batch_size: 16,
        learning_rate: 2e-3,
        seed: 33,
        log_every: 100,
        ..TrainConfig::default()
    };
    let (den, trace) = train_denoiser(model.denoiser, &model.schedule, &data, &cfg).unwrap();
    assert!(trace.last().unwrap().loss < trace.first().unwrap().loss);

    let mut hits = 0;
    let total = 100;
    for i in 0..total {
        let class = i % 3;
        let z = reverse_sample(
            &den,
            class,
            &model.schedule,
            t_steps,
            derive_seed(34, &format!("gen/{i}")),
        )
        .unwrap();
        let result = classify_latent(
            &den,
            &z,
            &[0, 1, 2],
            32,
            derive_seed(35, &format!("cls/{i}")),
            &model.schedule,
        )
        .unwrap();
        if result.predicted == class {
            hits += 1;
        }
    }
    assert!(
        hits >= 70,
        "only {hits}/{total} generated latents classified as their conditioning class"
    );
    println!("self-consistency: {hits}/{total}");
}
