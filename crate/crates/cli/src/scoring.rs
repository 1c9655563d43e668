//! Pathway dispatch: score one object under either the latent-3D or the
//! multi-view-2D model, producing a uniform per-object record.

use anyhow::anyhow;

use dc3do_core::classify::{
    classify_adaptive, classify_latent, classify_multiview_detailed, ClassificationResult,
    ObjectRecord, StageSpec,
};
use dc3do_core::geom::PointCloud;
use dc3do_core::nets::encode;
use dc3do_core::train::ModelParameters;

use crate::common::{render_views, view_cameras};
use crate::config::ExperimentConfig;

/// Scoring knobs shared by classify, eval, and ablation.
pub struct ScoreOptions {
    pub candidates: Vec<usize>,
    pub n_trials: usize,
    pub stages: Vec<StageSpec>,
    pub n_views: usize,
}

impl ScoreOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            candidates: cfg.candidates(),
            n_trials: cfg.classify.n_trials,
            stages: cfg.stage_specs(),
            n_views: cfg.views.n_views,
        }
    }
}

/// Image side length of a 2D model, from its latent dimension.
pub fn image_size_of(model: &ModelParameters) -> anyhow::Result<usize> {
    let dim = model.denoiser.dims.latent;
    let size = (dim as f64).sqrt().round() as usize;
    if size * size != dim {
        anyhow::bail!("model latent dimension {dim} is not a square image");
    }
    Ok(size)
}

/// Score one normalized cloud. Dispatches on the checkpoint: models with
/// an encoder take the latent pathway, encoder-free models render depth
/// views and vote.
pub fn classify_cloud(
    model: &ModelParameters,
    cfg: &ExperimentConfig,
    opts: &ScoreOptions,
    object_id: &str,
    pc: &PointCloud,
    seed: u64,
) -> anyhow::Result<ObjectRecord> {
    if opts.candidates.len() < 2 {
        anyhow::bail!(
            "need at least 2 candidate classes, got {:?}",
            opts.candidates
        );
    }
    match &model.encoder {
        Some(enc) => {
            let z0 = encode(enc, pc)?;
            let result = if opts.stages.is_empty() {
                classify_latent(
                    &model.denoiser,
                    &z0,
                    &opts.candidates,
                    opts.n_trials,
                    seed,
                    &model.schedule,
                )?
            } else {
                classify_adaptive(
                    &model.denoiser,
                    &z0,
                    &opts.candidates,
                    &opts.stages,
                    seed,
                    &model.schedule,
                )?
            };
            Ok(ObjectRecord::from_result(object_id.to_string(), &result))
        }
        None => {
            let size = image_size_of(model)?;
            let cameras = view_cameras(&cfg.views, opts.n_views)?;
            let views = render_views(pc, &cameras, size, cfg.point_radius(size))?;
            let (vote, per_view) = classify_multiview_detailed(
                &model.denoiser,
                &views,
                &opts.candidates,
                opts.n_trials,
                seed,
                &model.schedule,
            )?;
            Ok(aggregate_views(object_id, &opts.candidates, &vote.per_view, vote.final_vote, &per_view)?)
        }
    }
}

/// Fold per-view scoring results into one record: mean losses average
/// over views, trials sum, the prediction is the majority vote.
fn aggregate_views(
    object_id: &str,
    candidates: &[usize],
    votes: &[usize],
    final_vote: usize,
    per_view: &[ClassificationResult],
) -> anyhow::Result<ObjectRecord> {
    let k = candidates.len();
    let mut mean_losses = vec![0.0; k];
    let mut trials_used = vec![0usize; k];
    for r in per_view {
        for i in 0..k {
            mean_losses[i] += r.mean_losses[i] / per_view.len() as f64;
            trials_used[i] += r.trials_used[i];
        }
    }
    let posterior = dc3do_core::classify::posterior(&mean_losses, &vec![1.0 / k as f64; k])
        .map_err(|e| anyhow!(e))?;
    Ok(ObjectRecord {
        object_id: object_id.to_string(),
        candidates: candidates.to_vec(),
        mean_losses,
        posterior,
        predicted: final_vote,
        trials_used,
        votes: Some(votes.to_vec()),
    })
}
