//! `classify`: score one input shape against the candidate classes.

use std::path::Path;

use dc3do_core::rng::derive_seed;
use dc3do_core::train::load_checkpoint;

use crate::common::{load_cloud, write_json, CmdResult, ExitClass};
use crate::config::ExperimentConfig;
use crate::scoring::{classify_cloud, ScoreOptions};

pub fn run(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    input: &Path,
    id: Option<&str>,
) -> CmdResult<()> {
    let opts = ScoreOptions::from_config(cfg);
    if opts.candidates.len() < 2 {
        return Err(crate::common::validation(anyhow::anyhow!(
            "need at least 2 candidate classes, got {:?}",
            opts.candidates
        )));
    }
    let model = load_checkpoint(checkpoint).or_validation()?;
    let pc = load_cloud(input, cfg.dataset.points, cfg.seed).or_validation()?;
    let object_id = id
        .map(str::to_string)
        .or_else(|| input.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "object".to_string());

    let record = classify_cloud(
        &model,
        cfg,
        &opts,
        &object_id,
        &pc,
        derive_seed(cfg.seed, &format!("classify/{object_id}")),
    )
    .or_runtime()?;

    println!("{}", serde_json::to_string_pretty(&record).or_runtime()?);
    std::fs::create_dir_all(&cfg.output.dir).or_runtime()?;
    write_json(
        &cfg.output.dir.join(format!("classify_{object_id}.json")),
        &record,
    )
    .or_runtime()?;
    Ok(())
}
