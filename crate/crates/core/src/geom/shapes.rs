//! Procedural shape families used as a self-contained dataset.
//!
//! Three families of axis-aligned box unions with seeded jitter, so each
//! label is a distribution over shapes rather than a single mesh:
//!
//! * label 0 — slab: one wide flat box. After normalization every point of
//!   a slab cloud satisfies |z| <= 0.25 (family contract, tested).
//! * label 1 — seat: seat plate, back rest, and four legs.
//! * label 2 — cross: two intersecting elongated boxes.
//!
//! All jitter ranges are the `JITTER_*` constants below. Clouds come back
//! normalized (unit ball, centroid at origin) with exactly `n` points.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{normalize, sample_surface, PointCloud, TriangleMesh};
use crate::rng::{derive_seed, rng_from};

/// Number of generator families (valid labels are `0..NUM_SHAPE_FAMILIES`).
pub const NUM_SHAPE_FAMILIES: usize = 3;

/// Slab half-extents: x (length), y (width), z (height).
pub const JITTER_SLAB_X: (f64, f64) = (0.8, 1.0);
pub const JITTER_SLAB_Y: (f64, f64) = (0.4, 0.5);
pub const JITTER_SLAB_Z: (f64, f64) = (0.1, 0.16);

/// Seat family: half-width, seat height, back height above seat, leg half-thickness.
pub const JITTER_SEAT_W: (f64, f64) = (0.4, 0.55);
pub const JITTER_SEAT_H: (f64, f64) = (0.4, 0.6);
pub const JITTER_SEAT_BACK: (f64, f64) = (0.8, 1.1);
pub const JITTER_SEAT_LEG: (f64, f64) = (0.03, 0.06);

/// Cross family: fuselage half-length, wing half-span.
pub const JITTER_CROSS_LEN: (f64, f64) = (0.9, 1.1);
pub const JITTER_CROSS_SPAN: (f64, f64) = (0.7, 0.9);

fn draw(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    rng.random_range(range.0..range.1)
}

/// Append one axis-aligned box (center, half-extents) to a mesh under
/// construction.
fn push_box(verts: &mut Vec<[f64; 3]>, faces: &mut Vec<[usize; 3]>, c: [f64; 3], h: [f64; 3]) {
    let base = verts.len();
    for dz in [-1.0, 1.0] {
        for dy in [-1.0, 1.0] {
            for dx in [-1.0, 1.0] {
                verts.push([c[0] + dx * h[0], c[1] + dy * h[1], c[2] + dz * h[2]]);
            }
        }
    }
    // Corner order: index bit 0 = +x, bit 1 = +y, bit 2 = +z.
    const QUADS: [[usize; 4]; 6] = [
        [0, 1, 3, 2], // z-
        [4, 6, 7, 5], // z+
        [0, 4, 5, 1], // y-
        [2, 3, 7, 6], // y+
        [0, 2, 6, 4], // x-
        [1, 5, 7, 3], // x+
    ];
    for q in QUADS {
        faces.push([base + q[0], base + q[1], base + q[2]]);
        faces.push([base + q[0], base + q[2], base + q[3]]);
    }
}

fn slab_mesh(rng: &mut ChaCha8Rng) -> TriangleMesh {
    let h = [
        draw(rng, JITTER_SLAB_X),
        draw(rng, JITTER_SLAB_Y),
        draw(rng, JITTER_SLAB_Z),
    ];
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    push_box(&mut verts, &mut faces, [0.0; 3], h);
    TriangleMesh { vertices: verts, faces }
}

fn seat_mesh(rng: &mut ChaCha8Rng) -> TriangleMesh {
    let w = draw(rng, JITTER_SEAT_W);
    let seat_h = draw(rng, JITTER_SEAT_H);
    let back_h = draw(rng, JITTER_SEAT_BACK);
    let leg = draw(rng, JITTER_SEAT_LEG);
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    // Seat plate.
    push_box(&mut verts, &mut faces, [0.0, 0.0, seat_h], [w, w, 0.05]);
    // Back rest along the -x edge.
    push_box(
        &mut verts,
        &mut faces,
        [-(w - 0.05), 0.0, seat_h + back_h / 2.0],
        [0.05, w, back_h / 2.0],
    );
    // Four legs.
    let inset = w - leg;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            push_box(
                &mut verts,
                &mut faces,
                [sx * inset, sy * inset, seat_h / 2.0],
                [leg, leg, seat_h / 2.0],
            );
        }
    }
    TriangleMesh { vertices: verts, faces }
}

fn cross_mesh(rng: &mut ChaCha8Rng) -> TriangleMesh {
    let len = draw(rng, JITTER_CROSS_LEN);
    let span = draw(rng, JITTER_CROSS_SPAN);
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    // Fuselage along x.
    push_box(&mut verts, &mut faces, [0.0; 3], [len, 0.12, 0.12]);
    // Wing along y, slightly forward of center.
    push_box(
        &mut verts,
        &mut faces,
        [0.2 * len, 0.0, 0.0],
        [0.15, span, 0.04],
    );
    TriangleMesh { vertices: verts, faces }
}

/// Generate a normalized `n`-point cloud from family `label`.
///
/// Deterministic for fixed `(label, seed, n)`: box proportions are drawn
/// first from a stream derived from `(seed, label)`, then surface points
/// from a second derived stream.
pub fn gen_shape(label: usize, seed: u64, n: usize) -> Result<PointCloud> {
    if label >= NUM_SHAPE_FAMILIES {
        return Err(Error::UnknownClass {
            id: label,
            total: NUM_SHAPE_FAMILIES,
        });
    }
    let mut jitter_rng = rng_from(derive_seed(seed, &format!("gen-shape/{label}/jitter")));
    let mesh = match label {
        0 => slab_mesh(&mut jitter_rng),
        1 => seat_mesh(&mut jitter_rng),
        _ => cross_mesh(&mut jitter_rng),
    };
    let pc = sample_surface(&mesh, n, derive_seed(seed, &format!("gen-shape/{label}/points")))?;
    if pc.is_empty() {
        return Ok(pc);
    }
    normalize(&pc)
}
