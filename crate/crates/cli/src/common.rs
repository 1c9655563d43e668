//! Shared command plumbing: error classification for exit codes, cloud
//! ingestion, dataset files, and view-set construction.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use dc3do_core::geom::{
    farthest_point_sample, gen_shape, normalize, parse_off, parse_ply_ascii, parse_xyz,
    sample_surface, PointCloud,
};
use dc3do_core::rng::derive_seed;
use dc3do_core::views::{camera_ring, frontal_subset, render_depth, Camera, DepthImage};

use crate::config::ViewsConfig;

/// A command failure carrying its exit class: validation errors exit 1,
/// runtime failures exit 2.
#[derive(Debug)]
pub struct CmdError {
    pub is_validation: bool,
    pub err: anyhow::Error,
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.err)
    }
}

pub type CmdResult<T> = Result<T, CmdError>;

pub fn validation(err: impl Into<anyhow::Error>) -> CmdError {
    CmdError {
        is_validation: true,
        err: err.into(),
    }
}

pub fn runtime(err: impl Into<anyhow::Error>) -> CmdError {
    CmdError {
        is_validation: false,
        err: err.into(),
    }
}

/// Attach an exit class to any fallible expression.
pub trait ExitClass<T> {
    fn or_validation(self) -> CmdResult<T>;
    fn or_runtime(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> ExitClass<T> for Result<T, E> {
    fn or_validation(self) -> CmdResult<T> {
        self.map_err(|e| validation(e.into()))
    }

    fn or_runtime(self) -> CmdResult<T> {
        self.map_err(|e| runtime(e.into()))
    }
}

/// Load a shape file and bring it onto the classifier's input convention:
/// surface-sample meshes to `points`, downsample oversized clouds by
/// farthest point sampling, and normalize to the unit ball.
pub fn load_cloud(path: &Path, points: usize, seed: u64) -> anyhow::Result<PointCloud> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading input {}", path.display()))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let cloud = match ext.as_str() {
        "off" => {
            let mesh = parse_off(&text).with_context(|| format!("parsing {}", path.display()))?;
            sample_surface(&mesh, points, derive_seed(seed, "ingest/surface"))?
        }
        "ply" => parse_ply_ascii(&text).with_context(|| format!("parsing {}", path.display()))?,
        "xyz" => parse_xyz(&text).with_context(|| format!("parsing {}", path.display()))?,
        other => anyhow::bail!(
            "unsupported input extension `{other}` for {} (expected .off, .ply, or .xyz)",
            path.display()
        ),
    };
    let cloud = if cloud.len() > points {
        farthest_point_sample(&cloud, points, derive_seed(seed, "ingest/fps"))?
    } else {
        cloud
    };
    Ok(normalize(&cloud)?)
}

/// One dataset entry as recorded in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetItem {
    pub file: String,
    pub label: usize,
    pub seed: u64,
    pub split: String,
}

/// Dataset manifest: generator classes plus per-item provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub classes: Vec<usize>,
    pub points: usize,
    pub seed: u64,
    pub items: Vec<DatasetItem>,
}

pub fn dataset_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("dataset")
}

/// Load one split ("train" or "eval") of a generated dataset.
pub fn load_dataset_split(
    dir: &Path,
    split: &str,
) -> anyhow::Result<Vec<(String, PointCloud, usize)>> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .with_context(|| format!("reading dataset manifest {}", manifest_path.display()))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", manifest_path.display()))?;
    let mut out = Vec::new();
    for item in manifest.items.iter().filter(|i| i.split == split) {
        let path = dir.join(&item.file);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let pc = parse_xyz(&text).with_context(|| format!("parsing {}", path.display()))?;
        out.push((item.file.clone(), pc, item.label));
    }
    if out.is_empty() {
        anyhow::bail!("dataset at {} has no `{split}` items", dir.display());
    }
    Ok(out)
}

/// Generate one dataset cloud deterministically from the master seed.
pub fn generate_cloud(
    master_seed: u64,
    split: &str,
    label: usize,
    index: usize,
    points: usize,
) -> anyhow::Result<(PointCloud, u64)> {
    let item_seed = derive_seed(master_seed, &format!("gen/{split}/{label}/{index}"));
    let pc = gen_shape(label, item_seed, points)?;
    Ok((pc, item_seed))
}

/// The camera set implied by the views config: either the frontal wedge of
/// a 36-camera ring (first `n` of azimuths 10, 20, 30, 340, 350, 0) or an
/// even ring of `n` cameras.
pub fn view_cameras(v: &ViewsConfig, n: usize) -> anyhow::Result<Vec<Camera>> {
    if v.frontal_only {
        let ring = camera_ring(36, v.elevation_deg)?;
        let frontal = frontal_subset(&ring);
        if n > frontal.len() {
            anyhow::bail!("{n} views requested but the frontal wedge has {}", frontal.len());
        }
        Ok(frontal.into_iter().take(n).collect())
    } else {
        Ok(camera_ring(n, v.elevation_deg)?)
    }
}

/// Render a cloud from every camera.
pub fn render_views(
    pc: &PointCloud,
    cameras: &[Camera],
    size: usize,
    radius: f64,
) -> anyhow::Result<Vec<DepthImage>> {
    cameras
        .iter()
        .map(|cam| render_depth(pc, cam, size, radius).map_err(|e| anyhow!(e)))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
