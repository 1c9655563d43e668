//! `eval`: classify the held-out split and report per-class accuracies.

use std::path::Path;
use std::time::Instant;

use anyhow::anyhow;
use serde::Serialize;

use dc3do_core::metrics::{mean_per_class_accuracy, EvalReport};
use dc3do_core::rng::derive_seed;
use dc3do_core::train::load_checkpoint;

use crate::common::{dataset_dir, load_dataset_split, write_json, CmdResult, ExitClass};
use crate::config::ExperimentConfig;
use crate::manifest::{new_manifest, write_manifest};
use crate::scoring::{classify_cloud, ScoreOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// One pass per object over the full candidate set.
    Multiclass,
    /// The one-vs-rest protocol: each class-c object is scored against
    /// {c, not-c} using the complement conditioning rows.
    Binary,
}

#[derive(Serialize)]
struct EvalSummary {
    mode: &'static str,
    per_class_accuracy: Vec<f64>,
    mean_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    overall_accuracy: Option<f64>,
    confusion: Vec<Vec<usize>>,
    total_seconds: f64,
    mean_seconds_per_object: f64,
    objects: usize,
}

pub fn run(cfg: &ExperimentConfig, checkpoint: &Path, mode: EvalMode) -> CmdResult<()> {
    let model = load_checkpoint(checkpoint).or_validation()?;
    let data_dir = dataset_dir(&cfg.output.dir);
    let eval_items = load_dataset_split(&data_dir, "eval").or_validation()?;
    let n_classes = cfg.n_classes();
    let mut opts = ScoreOptions::from_config(cfg);

    if mode == EvalMode::Binary {
        let total = model.denoiser.dims.classes;
        if total != 2 * n_classes {
            return Err(crate::common::validation(anyhow!(
                "binary mode needs complement rows: model has {total} labels for {n_classes} classes \
                 (train with model.complement_classes = true)"
            )));
        }
    } else if opts.candidates.len() < 2 {
        return Err(crate::common::validation(anyhow!(
            "need at least 2 candidate classes, got {:?}",
            opts.candidates
        )));
    }

    let mut records = Vec::new();
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    let mut times = Vec::new();
    // Binary tallies: per class, [classified as c, classified as not-c].
    let mut binary_confusion = vec![[0usize; 2]; n_classes];
    let started = Instant::now();
    for (id, pc, label) in &eval_items {
        if mode == EvalMode::Binary {
            opts.candidates = vec![*label, n_classes + *label];
        }
        let t0 = Instant::now();
        let record = classify_cloud(
            &model,
            cfg,
            &opts,
            id,
            pc,
            derive_seed(cfg.seed, &format!("classify/{id}")),
        )
        .or_runtime()?;
        times.push(t0.elapsed().as_secs_f64());
        match mode {
            EvalMode::Multiclass => preds.push(record.predicted),
            EvalMode::Binary => {
                let as_self = record.predicted == *label;
                binary_confusion[*label][usize::from(!as_self)] += 1;
            }
        }
        labels.push(*label);
        records.push(record);
    }
    let total_seconds = started.elapsed().as_secs_f64();

    let summary = match mode {
        EvalMode::Multiclass => {
            let report = EvalReport::new(&preds, &labels, n_classes, times.clone())
                .or_runtime()?;
            let summary = EvalSummary {
                mode: "multiclass",
                per_class_accuracy: report.per_class_accuracy.clone(),
                mean_accuracy: report.mean_accuracy,
                overall_accuracy: Some(report.overall_accuracy()),
                confusion: report.confusion.clone(),
                total_seconds,
                mean_seconds_per_object: total_seconds / labels.len() as f64,
                objects: labels.len(),
            };
            std::fs::write(cfg.output.dir.join("eval_report.csv"), report.to_csv())
                .or_runtime()?;
            summary
        }
        EvalMode::Binary => {
            let per_class: Vec<f64> = binary_confusion
                .iter()
                .map(|&[ok, bad]| ok as f64 / (ok + bad) as f64)
                .collect();
            let mean = mean_per_class_accuracy(&per_class).or_runtime()?;
            let mut csv = String::from("class,accuracy\n");
            for (c, a) in per_class.iter().enumerate() {
                csv.push_str(&format!("{c},{a}\n"));
            }
            csv.push_str(&format!("mean,{mean}\n"));
            std::fs::write(cfg.output.dir.join("eval_report.csv"), csv).or_runtime()?;
            EvalSummary {
                mode: "binary",
                per_class_accuracy: per_class,
                mean_accuracy: mean,
                overall_accuracy: None,
                confusion: binary_confusion.iter().map(|r| r.to_vec()).collect(),
                total_seconds,
                mean_seconds_per_object: total_seconds / labels.len() as f64,
                objects: labels.len(),
            }
        }
    };

    write_json(&cfg.output.dir.join("eval_report.json"), &summary).or_runtime()?;
    let jsonl: String = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes"))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    std::fs::write(cfg.output.dir.join("eval_objects.jsonl"), jsonl).or_runtime()?;
    write_manifest(&cfg.output.dir, "run_eval.json", &new_manifest("eval", cfg)).or_runtime()?;

    println!(
        "evaluated {} objects: mean per-class accuracy {:.4} ({:.2}s total, {:.3}s/object)",
        summary.objects,
        summary.mean_accuracy,
        summary.total_seconds,
        summary.mean_seconds_per_object
    );
    for (c, a) in summary.per_class_accuracy.iter().enumerate() {
        println!("  class {c}: {a:.4}");
    }
    Ok(())
}
