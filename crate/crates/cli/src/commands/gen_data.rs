//! `gen-data`: write the procedural dataset as .xyz files plus a manifest.

use std::path::Path;

use anyhow::Context;

use dc3do_core::geom::write_xyz;

use crate::common::{
    dataset_dir, generate_cloud, write_json, CmdResult, DatasetItem, DatasetManifest, ExitClass,
};
use crate::config::ExperimentConfig;
use crate::manifest::{new_manifest, write_manifest};

pub fn run(cfg: &ExperimentConfig) -> CmdResult<()> {
    let dir = dataset_dir(&cfg.output.dir);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .or_runtime()?;

    let mut items = Vec::new();
    for split in ["train", "eval"] {
        let per_class = match split {
            "train" => cfg.dataset.train_per_class,
            _ => cfg.dataset.eval_per_class,
        };
        for &label in &cfg.dataset.classes {
            for index in 0..per_class {
                let (pc, item_seed) =
                    generate_cloud(cfg.seed, split, label, index, cfg.dataset.points)
                        .or_runtime()?;
                let file = format!("c{label}_{split}_{index:04}.xyz");
                write_file(&dir, &file, &write_xyz(&pc)).or_runtime()?;
                items.push(DatasetItem {
                    file,
                    label,
                    seed: item_seed,
                    split: split.to_string(),
                });
            }
        }
    }
    let manifest = DatasetManifest {
        classes: cfg.dataset.classes.clone(),
        points: cfg.dataset.points,
        seed: cfg.seed,
        items,
    };
    write_json(&dir.join("manifest.json"), &manifest).or_runtime()?;
    write_manifest(&cfg.output.dir, "run_gen_data.json", &new_manifest("gen-data", cfg))
        .or_runtime()?;
    println!(
        "wrote {} clouds to {}",
        manifest.items.len(),
        dir.display()
    );
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
