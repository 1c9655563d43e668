//! `ablate-views`: accuracy and inference wall time over an
//! image-size x view-count grid for the multi-view pathway.
//!
//! Image dimension fixes the 2D denoiser's input width, so each grid size
//! gets its own small model, trained once and cached under the output
//! directory. Wall time covers inference only (rendering plus scoring).

use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

use dc3do_core::classify::classify_multiview;
use dc3do_core::geom::PointCloud;
use dc3do_core::rng::derive_seed;
use dc3do_core::train::{
    init_model, load_checkpoint, save_checkpoint, train_denoiser, ModelParameters,
};

use crate::common::{generate_cloud, render_views, view_cameras, CmdResult, ExitClass};
use crate::config::ExperimentConfig;
use crate::manifest::{new_manifest, write_manifest};

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub image_size: usize,
    pub n_views: usize,
    pub accuracy: f64,
    pub wall_time_s: f64,
}

pub fn run(cfg: &ExperimentConfig) -> CmdResult<()> {
    let rows = run_grid(cfg)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).or_runtime()?;
    let mut csv = String::from("image_size,n_views,accuracy,wall_time_s\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.image_size, r.n_views, r.accuracy, r.wall_time_s
        ));
    }
    std::fs::write(dir.join("ablation.csv"), csv).or_runtime()?;
    write_manifest(dir, "run_ablate.json", &new_manifest("ablate-views", cfg)).or_runtime()?;
    for r in &rows {
        println!(
            "S={:<4} views={:<2} accuracy={:.4} wall={:.3}s",
            r.image_size, r.n_views, r.accuracy, r.wall_time_s
        );
    }
    Ok(())
}

/// The grid runner, exposed for the acceptance suite.
pub fn run_grid(cfg: &ExperimentConfig) -> CmdResult<Vec<AblationRow>> {
    let a = &cfg.ablation;
    let max_views = *a.view_counts.iter().max().expect("validated non-empty");
    let cameras = view_cameras(&cfg.views, max_views).or_validation()?;

    // In-memory ablation dataset, derived from the master seed.
    let mut train_clouds: Vec<(PointCloud, usize)> = Vec::new();
    let mut eval_clouds: Vec<(String, PointCloud, usize)> = Vec::new();
    for &label in &cfg.dataset.classes {
        for i in 0..a.train_per_class {
            let (pc, _) = generate_cloud(cfg.seed, "ablate-train", label, i, cfg.dataset.points)
                .or_runtime()?;
            train_clouds.push((pc, label));
        }
        for i in 0..a.eval_per_class {
            let (pc, _) = generate_cloud(cfg.seed, "ablate-eval", label, i, cfg.dataset.points)
                .or_runtime()?;
            eval_clouds.push((format!("c{label}_e{i}"), pc, label));
        }
    }

    let model_dir = cfg.output.dir.join("ablate_models");
    std::fs::create_dir_all(&model_dir).or_runtime()?;
    let candidates = cfg.dataset.classes.clone();
    let mut rows = Vec::new();
    for &size in &a.image_sizes {
        let model = model_for_size(cfg, size, &cameras, &train_clouds, &model_dir)
            .with_context(|| format!("training ablation model at S={size}"))
            .or_runtime()?;
        for &n in &a.view_counts {
            let cams = &cameras[..n];
            let started = Instant::now();
            let mut correct = 0usize;
            for (id, pc, label) in &eval_clouds {
                let views =
                    render_views(pc, cams, size, cfg.point_radius(size)).or_runtime()?;
                let vote = classify_multiview(
                    &model.denoiser,
                    &views,
                    &candidates,
                    a.n_trials,
                    derive_seed(cfg.seed, &format!("ablate/{size}/{n}/{id}")),
                    &model.schedule,
                )
                .or_runtime()?;
                if vote.final_vote == *label {
                    correct += 1;
                }
            }
            rows.push(AblationRow {
                image_size: size,
                n_views: n,
                accuracy: correct as f64 / eval_clouds.len() as f64,
                wall_time_s: started.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}

/// Train (or load the cached) 2D model for one grid size.
fn model_for_size(
    cfg: &ExperimentConfig,
    size: usize,
    cameras: &[dc3do_core::views::Camera],
    train_clouds: &[(PointCloud, usize)],
    model_dir: &std::path::Path,
) -> anyhow::Result<ModelParameters> {
    let path = model_dir.join(format!("model_s{size}.bin"));
    if path.is_file() {
        let model = load_checkpoint(&path)?;
        if model.denoiser.dims.latent == size * size {
            return Ok(model);
        }
    }
    let mut latents = Vec::with_capacity(train_clouds.len() * cameras.len());
    for (pc, label) in train_clouds {
        for view in render_views(pc, cameras, size, cfg.point_radius(size))? {
            latents.push((view.to_latent(), *label));
        }
    }
    let base = init_model(
        &cfg.multiview2d_spec(size),
        derive_seed(cfg.seed, &format!("ablate-init/{size}")),
    )?;
    let mut train_cfg = cfg.train_config();
    train_cfg.steps = cfg.ablation.train_steps;
    train_cfg.seed = derive_seed(cfg.seed, &format!("ablate-train/{size}"));
    let schedule = base.schedule.clone();
    let (den, _) = train_denoiser(base.denoiser, &schedule, &latents, &train_cfg)?;
    let model = ModelParameters {
        encoder: None,
        denoiser: den,
        schedule,
    };
    save_checkpoint(&model, &path)?;
    Ok(model)
}
