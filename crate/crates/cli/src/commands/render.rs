//! `render`: write PGM depth views of one input shape.

use std::path::Path;

use serde::Serialize;

use dc3do_core::views::Camera;

use crate::common::{load_cloud, render_views, view_cameras, write_json, CmdResult, ExitClass};
use crate::config::ExperimentConfig;

#[derive(Serialize)]
struct RenderManifest {
    input: String,
    image_size: usize,
    point_radius: f64,
    files: Vec<String>,
    cameras: Vec<Camera>,
}

pub fn run(cfg: &ExperimentConfig, input: &Path) -> CmdResult<()> {
    let pc = load_cloud(input, cfg.dataset.points, cfg.seed).or_validation()?;
    let cameras = view_cameras(&cfg.views, cfg.views.n_views).or_validation()?;
    let size = cfg.views.image_size;
    let radius = cfg.point_radius(size);
    let views = render_views(&pc, &cameras, size, radius).or_runtime()?;

    let dir = cfg.output.dir.join("renders");
    std::fs::create_dir_all(&dir).or_runtime()?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "shape".to_string());
    let mut files = Vec::new();
    for view in &views {
        let name = format!(
            "{stem}_az{:03}_el{:02}.pgm",
            view.camera.azimuth_deg.round() as i64,
            view.camera.elevation_deg.round() as i64
        );
        std::fs::write(dir.join(&name), view.to_pgm()).or_runtime()?;
        files.push(name);
    }
    write_json(
        &dir.join(format!("{stem}_renders.json")),
        &RenderManifest {
            input: input.display().to_string(),
            image_size: size,
            point_radius: radius,
            files,
            cameras,
        },
    )
    .or_runtime()?;
    println!("wrote {} views to {}", views.len(), dir.display());
    Ok(())
}
