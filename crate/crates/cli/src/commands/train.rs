//! `train`: fit the configured pathway on the generated dataset and write
//! a checkpoint plus the loss trace.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use dc3do_core::rng::derive_seed;
use dc3do_core::train::{
    init_model, load_checkpoint, save_checkpoint, train_denoiser, train_joint, ModelParameters,
    TracePoint,
};

use crate::common::{
    dataset_dir, load_dataset_split, render_views, view_cameras, CmdResult, ExitClass,
};
use crate::config::{ExperimentConfig, Pathway};
use crate::manifest::{new_manifest, read_manifest, write_manifest};

pub fn run(cfg: &ExperimentConfig, resume: Option<&Path>) -> CmdResult<()> {
    let data_dir = dataset_dir(&cfg.output.dir);
    if !data_dir.join("manifest.json").is_file() {
        return Err(crate::common::validation(anyhow!(
            "no dataset at {} (run gen-data first)",
            data_dir.display()
        )));
    }
    let train_items = load_dataset_split(&data_dir, "train").or_validation()?;

    // Resuming picks up the previous run's weights and step count.
    let (start_model, prev_steps) = match resume {
        Some(run_dir) => {
            let model = load_checkpoint(&run_dir.join("checkpoint.bin"))
                .with_context(|| format!("loading checkpoint from {}", run_dir.display()))
                .or_validation()?;
            let prev = read_manifest(&run_dir.join("run_train.json"))
                .ok()
                .and_then(|m| m.steps_completed)
                .unwrap_or(0);
            (Some(model), prev)
        }
        None => (None, 0),
    };

    let mut train_cfg = cfg.train_config();
    if prev_steps > 0 {
        // A fresh stream for the continuation, not a replay of run one.
        train_cfg.seed = derive_seed(train_cfg.seed, &format!("resume/{prev_steps}"));
    }

    std::fs::create_dir_all(&cfg.output.dir).or_runtime()?;
    let (model, trace) = match cfg.model.pathway {
        Pathway::Latent3d => {
            let base = match start_model {
                Some(m) if m.encoder.is_some() => m,
                Some(_) => {
                    return Err(crate::common::validation(anyhow!(
                        "resume checkpoint has no encoder but pathway is latent3d"
                    )))
                }
                None => init_model(&cfg.latent3d_spec(), derive_seed(cfg.seed, "model-init"))
                    .or_validation()?,
            };
            let clouds: Vec<_> = train_items
                .iter()
                .map(|(_, pc, label)| (pc.clone(), *label))
                .collect();
            let schedule = base.schedule.clone();
            let (enc, den, trace) = train_joint(
                base.encoder.expect("latent3d model has encoder"),
                base.denoiser,
                &schedule,
                &clouds,
                &train_cfg,
            )
            .or_runtime()?;
            (
                ModelParameters {
                    encoder: Some(enc),
                    denoiser: den,
                    schedule,
                },
                trace,
            )
        }
        Pathway::Multiview2d => {
            let base = match start_model {
                Some(m) if m.encoder.is_none() => m,
                Some(_) => {
                    return Err(crate::common::validation(anyhow!(
                        "resume checkpoint has an encoder but pathway is multiview2d"
                    )))
                }
                None => init_model(
                    &cfg.multiview2d_spec(cfg.views.image_size),
                    derive_seed(cfg.seed, "model-init"),
                )
                .or_validation()?,
            };
            let size = cfg.views.image_size;
            if base.denoiser.dims.latent != size * size {
                return Err(crate::common::validation(anyhow!(
                    "checkpoint expects {}-dim images but views.image_size is {size}",
                    base.denoiser.dims.latent
                )));
            }
            let cameras = view_cameras(&cfg.views, cfg.views.n_views).or_validation()?;
            let radius = cfg.point_radius(size);
            let mut latents = Vec::with_capacity(train_items.len() * cameras.len());
            for (_, pc, label) in &train_items {
                for view in render_views(pc, &cameras, size, radius).or_runtime()? {
                    latents.push((view.to_latent(), *label));
                }
            }
            let schedule = base.schedule.clone();
            let (den, trace) =
                train_denoiser(base.denoiser, &schedule, &latents, &train_cfg).or_runtime()?;
            (
                ModelParameters {
                    encoder: None,
                    denoiser: den,
                    schedule,
                },
                trace,
            )
        }
    };

    let ckpt_path = cfg.output.dir.join("checkpoint.bin");
    save_checkpoint(&model, &ckpt_path).or_runtime()?;
    write_loss_csv(&cfg.output.dir.join("loss.csv"), &trace, prev_steps).or_runtime()?;

    let mut manifest = new_manifest("train", cfg);
    manifest.steps_completed = Some(prev_steps + cfg.training.steps);
    write_manifest(&cfg.output.dir, "run_train.json", &manifest).or_runtime()?;

    let first = trace.first().map(|p| p.loss).unwrap_or(f64::NAN);
    let last = trace.last().map(|p| p.loss).unwrap_or(f64::NAN);
    println!(
        "trained {} steps (total {}); loss {first:.4} -> {last:.4}; checkpoint {}",
        cfg.training.steps,
        prev_steps + cfg.training.steps,
        ckpt_path.display()
    );
    Ok(())
}

/// Write `step,loss` rows. On resume the steps continue the previous
/// numbering and rows append to the existing file.
fn write_loss_csv(path: &PathBuf, trace: &[TracePoint], prev_steps: usize) -> anyhow::Result<()> {
    use std::io::Write;
    let append = prev_steps > 0 && path.is_file();
    let mut out = String::new();
    if !append {
        out.push_str("step,loss\n");
    }
    for p in trace {
        out.push_str(&format!("{},{}\n", prev_steps + p.step, p.loss));
    }
    if append {
        let mut f = std::fs::OpenOptions::new().append(true).open(path)?;
        f.write_all(out.as_bytes())?;
    } else {
        std::fs::write(path, out)?;
    }
    Ok(())
}
