//! Point-cloud and mesh geometry: ingestion, generation, normalization,
//! and resampling.

mod io;
mod shapes;

pub use io::{parse_off, parse_ply_ascii, parse_xyz, write_xyz};
pub use shapes::{gen_shape, NUM_SHAPE_FAMILIES};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Indexed triangle mesh in unitless model space.
///
/// Faces index into `vertices`; polygons with more than three sides are
/// fan-triangulated at parse time, so faces here are always triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Build a mesh, checking that every face index is in range.
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (i, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= vertices.len() {
                    return Err(Error::InvalidArgument(format!(
                        "face {i} references vertex {v}, but mesh has {} vertices",
                        vertices.len()
                    )));
                }
            }
        }
        Ok(Self { vertices, faces })
    }

    /// Area of face `i` (half the cross-product norm).
    pub fn face_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.faces[i];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let u = sub(b, a);
        let v = sub(c, a);
        0.5 * norm(cross(u, v))
    }
}

/// A set of 3D points. After [`normalize`] the centroid sits at the origin
/// and the farthest point lies on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Arithmetic mean of the points. `None` when empty.
    pub fn centroid(&self) -> Option<[f64; 3]> {
        if self.points.is_empty() {
            return None;
        }
        let mut c = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        let n = self.points.len() as f64;
        Some([c[0] / n, c[1] / n, c[2] / n])
    }

    /// Largest point norm. 0 when empty.
    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| norm(*p)).fold(0.0, f64::max)
    }
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Center a cloud on its centroid and scale so the farthest point has
/// norm 1. If all points coincide the cloud is only translated.
pub fn normalize(pc: &PointCloud) -> Result<PointCloud> {
    let c = pc.centroid().ok_or(Error::Empty("point cloud"))?;
    let mut centered: Vec<[f64; 3]> = pc
        .points
        .iter()
        .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
        .collect();
    let r = centered.iter().map(|p| norm(*p)).fold(0.0, f64::max);
    if r > 0.0 {
        for p in &mut centered {
            for k in 0..3 {
                p[k] /= r;
            }
        }
    }
    Ok(PointCloud::new(centered))
}

/// Draw `n` points from the surface of `mesh`, area-proportionally across
/// faces and uniformly (barycentric) within each face.
///
/// Deterministic for a fixed seed. Errors if every face has zero area.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    Ok(PointCloud::new(
        sample_surface_with_faces(mesh, n, seed)?
            .into_iter()
            .map(|(p, _)| p)
            .collect(),
    ))
}

/// As [`sample_surface`], but each sample carries the index of the face it
/// was drawn from. Used by tests that check area proportionality.
pub fn sample_surface_with_faces(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<Vec<([f64; 3], usize)>> {
    if mesh.faces.is_empty() {
        return Err(Error::Empty("mesh face list"));
    }
    // Cumulative area table for face selection by inverse CDF.
    let mut cum = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for i in 0..mesh.faces.len() {
        total += mesh.face_area(i);
        cum.push(total);
    }
    if total <= 0.0 {
        return Err(Error::InvalidArgument(
            "all mesh faces are degenerate (zero total area)".into(),
        ));
    }
    let mut rng = rng_from(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random_range(0.0..total);
        let fi = match cum.binary_search_by(|a| a.partial_cmp(&u).unwrap()) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
        .min(mesh.faces.len() - 1);
        let [ia, ib, ic] = mesh.faces[fi];
        let (a, b, c) = (mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]);
        // Uniform barycentric sample via square-root reflection.
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        out.push((
            [
                wa * a[0] + wb * b[0] + wc * c[0],
                wa * a[1] + wb * b[1] + wc * c[1],
                wa * a[2] + wb * b[2] + wc * c[2],
            ],
            fi,
        ));
    }
    Ok(out)
}

/// Greedy farthest point sampling.
///
/// The first point is a seeded uniform draw; each subsequent pick maximizes
/// the minimum distance to the already-chosen set, breaking ties toward the
/// lowest index. Output order is visitation order.
pub fn farthest_point_sample(pc: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    let n = pc.len();
    if k == 0 {
        return Err(Error::InvalidArgument("farthest point sample: k = 0".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "farthest point sample: k = {k} exceeds point count {n}"
        )));
    }
    let first = rng_from(seed).random_range(0..n);
    Ok(PointCloud::new(fps_from(&pc.points, k, first)))
}

/// Greedy FPS with an explicit start index (shared by the public op and by
/// oracle tests that need to control the start).
pub fn fps_from(points: &[[f64; 3]], k: usize, first: usize) -> Vec<[f64; 3]> {
    let n = points.len();
    let mut chosen = Vec::with_capacity(k);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut current = first;
    for _ in 0..k {
        chosen.push(points[current]);
        for (i, d) in min_d2.iter_mut().enumerate() {
            *d = d.min(dist2(points[i], points[current]));
        }
        // Next pick: max of min-distance, lowest index on ties.
        let mut best = 0;
        for i in 1..n {
            if min_d2[i] > min_d2[best] {
                best = i;
            }
        }
        current = best;
    }
    chosen
}
