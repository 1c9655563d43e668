//! Declarative experiment configuration: one TOML file plus `--set`
//! overrides (overrides win). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use dc3do_core::classify::StageSpec;
use dc3do_core::nets::{DenoiserDims, EncoderDims};
use dc3do_core::train::{ModelSpec, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every component stream is derived from it.
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub views: ViewsConfig,
    #[serde(default)]
    pub ablation: AblationConfig,
    pub output: OutputConfig,
}

fn d_seed() -> u64 {
    7
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Generator family labels; must be 0..n contiguous.
    pub classes: Vec<usize>,
    pub train_per_class: usize,
    pub eval_per_class: usize,
    /// Points per cloud (surface samples).
    pub points: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            classes: vec![0, 1, 2],
            train_per_class: 200,
            eval_per_class: 50,
            points: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pathway {
    /// Point cloud -> encoder -> global latent diffusion.
    Latent3d,
    /// Depth renders -> per-view image diffusion -> majority vote.
    Multiview2d,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub pathway: Pathway,
    pub latent_dim: usize,
    pub encoder_hidden: usize,
    pub denoiser_hidden: usize,
    pub class_embed_dim: usize,
    pub time_embed_dim: usize,
    /// Add one "not class j" conditioning row per class.
    pub complement_classes: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            pathway: Pathway::Latent3d,
            latent_dim: 32,
            encoder_hidden: 64,
            denoiser_hidden: 128,
            class_embed_dim: 16,
            time_embed_dim: 16,
            complement_classes: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub t_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            t_steps: 1000,
            beta_min: 1e-4,
            beta_max: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub freeze_encoder: bool,
    pub log_every: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            steps: 1500,
            batch_size: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            freeze_encoder: false,
            log_every: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub n_trials: usize,
    /// Candidate class ids; empty means all dataset classes.
    pub candidates: Vec<usize>,
    /// Adaptive pruning stages as [trials, keep] pairs; empty disables.
    pub adaptive_stages: Vec<[usize; 2]>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            n_trials: 64,
            candidates: vec![],
            adaptive_stages: vec![],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViewsConfig {
    pub n_views: usize,
    /// Use the frontal wedge of a 36-camera ring instead of an even ring.
    pub frontal_only: bool,
    pub image_size: usize,
    pub elevation_deg: f64,
    /// Splat radius in pixels; 0 means the default image_size / 64.
    pub point_radius: f64,
}

impl Default for ViewsConfig {
    fn default() -> Self {
        Self {
            n_views: 6,
            frontal_only: true,
            image_size: 64,
            elevation_deg: 20.0,
            point_radius: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub image_sizes: Vec<usize>,
    pub view_counts: Vec<usize>,
    pub train_steps: usize,
    pub train_per_class: usize,
    pub eval_per_class: usize,
    pub n_trials: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            image_sizes: vec![16, 32, 64],
            view_counts: vec![1, 6],
            train_steps: 300,
            train_per_class: 20,
            eval_per_class: 10,
            n_trials: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl ExperimentConfig {
    /// Load a config file and apply `--set section.key=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text, overrides)
            .with_context(|| format!("in config {}", path.display()))
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let table: toml::Table = text.parse().context("parsing TOML")?;
        let mut value = toml::Value::Table(table);
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: ExperimentConfig = value.try_into().context("interpreting config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        let mut sorted = d.classes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() || sorted != (0..sorted.len()).collect::<Vec<_>>() {
            bail!("dataset.classes must be the contiguous labels 0..n, got {:?}", d.classes);
        }
        if d.train_per_class == 0 || d.points == 0 {
            bail!("dataset.train_per_class and dataset.points must be >= 1");
        }
        let m = &self.model;
        if m.latent_dim == 0 || m.encoder_hidden == 0 || m.denoiser_hidden == 0 {
            bail!("model dimensions must be >= 1");
        }
        if m.time_embed_dim < 2 || m.time_embed_dim % 2 != 0 {
            bail!("model.time_embed_dim must be even and >= 2");
        }
        let s = &self.schedule;
        if s.t_steps == 0 || !(s.beta_min > 0.0) || s.beta_min > s.beta_max || !(s.beta_max < 1.0)
        {
            bail!(
                "schedule needs t_steps >= 1 and 0 < beta_min <= beta_max < 1, got T={} beta=[{}, {}]",
                s.t_steps, s.beta_min, s.beta_max
            );
        }
        self.train_config().validate().map_err(|e| anyhow!("{e}"))?;
        if self.classify.n_trials == 0 {
            bail!("classify.n_trials must be >= 1");
        }
        for c in &self.classify.candidates {
            if !self.dataset.classes.contains(c) {
                bail!("classify.candidates entry {c} is not a dataset class");
            }
        }
        let v = &self.views;
        if v.image_size < 8 {
            bail!("views.image_size must be >= 8");
        }
        if v.n_views == 0 || (v.frontal_only && v.n_views > 6) {
            bail!("views.n_views must be >= 1 (and <= 6 with frontal_only)");
        }
        let a = &self.ablation;
        if a.image_sizes.is_empty() || a.view_counts.is_empty() {
            bail!("ablation.image_sizes and ablation.view_counts must be non-empty");
        }
        if a.image_sizes.iter().any(|&s| s < 8) {
            bail!("ablation.image_sizes entries must be >= 8");
        }
        if a.view_counts.iter().any(|&n| n == 0 || n > 6) {
            bail!("ablation.view_counts entries must be in 1..=6");
        }
        if a.train_steps == 0 || a.train_per_class == 0 || a.eval_per_class == 0 || a.n_trials == 0
        {
            bail!("ablation counts must be >= 1");
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.dataset.classes.len()
    }

    /// Candidate list for classification: explicit, or all dataset classes.
    pub fn candidates(&self) -> Vec<usize> {
        if self.classify.candidates.is_empty() {
            self.dataset.classes.clone()
        } else {
            self.classify.candidates.clone()
        }
    }

    pub fn stage_specs(&self) -> Vec<StageSpec> {
        self.classify
            .adaptive_stages
            .iter()
            .map(|&[trials, keep]| StageSpec { trials, keep })
            .collect()
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            steps: t.steps,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            seed: dc3do_core::rng::derive_seed(self.seed, "train"),
            freeze_encoder: t.freeze_encoder,
            complement_conditioning: self.model.complement_classes,
            log_every: t.log_every,
        }
    }

    /// Total conditioning labels, including complement rows when enabled.
    pub fn total_labels(&self) -> usize {
        if self.model.complement_classes {
            2 * self.n_classes()
        } else {
            self.n_classes()
        }
    }

    /// Model spec for the 3D latent pathway.
    pub fn latent3d_spec(&self) -> ModelSpec {
        ModelSpec {
            encoder: Some(EncoderDims {
                hidden: self.model.encoder_hidden,
                latent: self.model.latent_dim,
            }),
            denoiser: DenoiserDims {
                latent: self.model.latent_dim,
                hidden: self.model.denoiser_hidden,
                classes: self.total_labels(),
                class_embed: self.model.class_embed_dim,
                time_embed: self.model.time_embed_dim,
                t_steps: self.schedule.t_steps,
            },
            beta_min: self.schedule.beta_min,
            beta_max: self.schedule.beta_max,
        }
    }

    /// Model spec for the 2D multi-view pathway at a given image size.
    pub fn multiview2d_spec(&self, image_size: usize) -> ModelSpec {
        ModelSpec {
            encoder: None,
            denoiser: DenoiserDims {
                latent: image_size * image_size,
                hidden: self.model.denoiser_hidden,
                classes: self.total_labels(),
                class_embed: self.model.class_embed_dim,
                time_embed: self.model.time_embed_dim,
                t_steps: self.schedule.t_steps,
            },
            beta_min: self.schedule.beta_min,
            beta_max: self.schedule.beta_max,
        }
    }

    /// Splat radius rule: explicit, or image_size / 64.
    pub fn point_radius(&self, image_size: usize) -> f64 {
        if self.views.point_radius > 0.0 {
            self.views.point_radius
        } else {
            (image_size as f64 / 64.0).max(0.75)
        }
    }
}

/// Apply one `section.key=value` override. The value is parsed as TOML, so
/// numbers, booleans, arrays, and strings all work.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key=value"))?;
    let parsed: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .map(|t| t["v"].clone())
        .or_else(|_| {
            format!("v = \"{raw}\"")
                .parse::<toml::Table>()
                .map(|t| t["v"].clone())
        })
        .map_err(|e| anyhow!("override value `{raw}`: {e}"))?;
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if i + 1 == parts.len() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| anyhow!("`{}` is not a table", parts[..i].join(".")))?;
            table.insert((*part).to_string(), parsed);
            return Ok(());
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("`{}` is not a table", parts[..i].join(".")))?;
        node = table
            .entry((*part).to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!()
}
