//! Camera-ring geometry and orthographic depth rendering.
//!
//! Conventions (z is up):
//! * A camera at azimuth `a`, elevation `e` looks at the origin from the
//!   direction `(cos e cos a, cos e sin a, sin e)`.
//! * Rendering is orthographic onto an S x S grid covering [-1, 1]^2 in the
//!   camera's right/up axes; each point splats as a disc.
//! * Depth is affine in the view-axis coordinate: the nearest possible
//!   surface (view coordinate +1) maps to 1.0 and the farthest (-1) to
//!   1/255, so any splatted pixel is strictly positive. Background is 0.
//! * Pixel rows run top to bottom; camera-up points toward row 0.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::PointCloud;

/// Orthographic camera on a ring around the z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Camera {
    /// Degrees in [0, 360).
    pub azimuth_deg: f64,
    /// Degrees above the horizontal plane.
    pub elevation_deg: f64,
}

impl Camera {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self {
            azimuth_deg: azimuth_deg.rem_euclid(360.0),
            elevation_deg,
        }
    }
}

/// S x S grayscale depth render of a point cloud from one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub size: usize,
    /// Row-major, row 0 at the top; values in [0, 1], background 0.
    pub pixels: Vec<f64>,
    pub camera: Camera,
}

impl DepthImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.size + col]
    }

    /// Flatten to a latent vector for the image-diffusion pathway:
    /// row-major pixel order, mapped to [-1, 1] (background -1) so the
    /// signal scale matches the unit noise of the forward process.
    pub fn to_latent(&self) -> Vec<f64> {
        self.pixels.iter().map(|p| 2.0 * p - 1.0).collect()
    }

    /// Encode as binary PGM (P5, 8-bit); pixel byte = round(255 * depth).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.size, self.size).into_bytes();
        out.extend(self.pixels.iter().map(|&v| (255.0 * v).round() as u8));
        out
    }
}

/// `n_views` cameras at azimuths `i * 360 / n_views` for i = 1..=n_views,
/// all at the given elevation.
pub fn camera_ring(n_views: usize, elevation_deg: f64) -> Result<Vec<Camera>> {
    if n_views == 0 {
        return Err(Error::InvalidArgument("camera ring needs n_views >= 1".into()));
    }
    Ok((1..=n_views)
        .map(|i| Camera::new(i as f64 * 360.0 / n_views as f64, elevation_deg))
        .collect())
}

/// Cameras of a ring within the frontal wedge: azimuth <= 30 degrees or
/// >= 340 degrees. For a 36-camera ring this selects azimuths
/// {10, 20, 30, 340, 350, 0}.
pub fn frontal_subset(ring: &[Camera]) -> Vec<Camera> {
    ring.iter()
        .copied()
        .filter(|c| c.azimuth_deg <= 30.0 + 1e-9 || c.azimuth_deg >= 340.0 - 1e-9)
        .collect()
}

/// Rotate a cloud by `degrees` about the z (up) axis.
pub fn rotate_z(pc: &PointCloud, degrees: f64) -> PointCloud {
    let r = degrees.to_radians();
    let (s, c) = r.sin_cos();
    PointCloud::new(
        pc.points
            .iter()
            .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]])
            .collect(),
    )
}

/// Transform a point into the camera frame of `cam`:
/// returns (u right, v up, w toward the camera).
fn to_camera_frame(p: [f64; 3], cam: &Camera) -> (f64, f64, f64) {
    let a = cam.azimuth_deg.to_radians();
    let e = cam.elevation_deg.to_radians();
    let (sa, ca) = a.sin_cos();
    let (se, ce) = e.sin_cos();
    // q = Rz(-a) p brings the camera into the x-z plane.
    let qx = ca * p[0] + sa * p[1];
    let qy = -sa * p[0] + ca * p[1];
    let qz = p[2];
    // r = Ry(e) q brings the camera onto the +x axis.
    let rx = ce * qx + se * qz;
    let ry = qy;
    let rz = -se * qx + ce * qz;
    // Camera looks along -x; up is +z, so right = -y.
    (-ry, rz, rx)
}

const DEPTH_FLOOR: f64 = 1.0 / 255.0;

/// Render an orthographic depth image.
///
/// Each point is splatted as a disc of `point_radius` pixels; overlapping
/// splats keep the nearest depth (z-buffer). Points projecting outside
/// [-1, 1]^2 are clipped per pixel.
pub fn render_depth(
    pc: &PointCloud,
    cam: &Camera,
    size: usize,
    point_radius: f64,
) -> Result<DepthImage> {
    if size < 8 {
        return Err(Error::InvalidArgument(format!(
            "image size {size} below minimum 8"
        )));
    }
    let s = size as f64;
    let mut pixels = vec![0.0; size * size];
    for p in &pc.points {
        let (u, v, w) = to_camera_frame(*p, cam);
        // Continuous pixel coordinates: +u to the right, +v toward row 0.
        let px = (u + 1.0) / 2.0 * s;
        let py = (1.0 - (v + 1.0) / 2.0) * s;
        let depth = DEPTH_FLOOR + (1.0 - DEPTH_FLOOR) * (w.clamp(-1.0, 1.0) + 1.0) / 2.0;
        let r = point_radius.max(0.0);
        let c0 = ((px - r - 0.5).floor().max(0.0)) as usize;
        let c1 = ((px + r - 0.5).ceil().min(s - 1.0)).max(0.0) as usize;
        let r0 = ((py - r - 0.5).floor().max(0.0)) as usize;
        let r1 = ((py + r - 0.5).ceil().min(s - 1.0)).max(0.0) as usize;
        for row in r0..=r1 {
            for col in c0..=c1 {
                let dx = (col as f64 + 0.5) - px;
                let dy = (row as f64 + 0.5) - py;
                if dx * dx + dy * dy <= r * r {
                    let cell = &mut pixels[row * size + col];
                    if depth > *cell {
                        *cell = depth;
                    }
                }
            }
        }
    }
    Ok(DepthImage {
        size,
        pixels,
        camera: *cam,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_of_36_steps_by_ten_degrees() {
        let ring = camera_ring(36, 20.0).unwrap();
        assert_eq!(ring.len(), 36);
        assert_eq!(ring[0].azimuth_deg, 10.0);
        assert_eq!(ring[34].azimuth_deg, 350.0);
        assert_eq!(ring[35].azimuth_deg, 0.0);
        for w in ring.windows(2).take(34) {
            assert!((w[1].azimuth_deg - w[0].azimuth_deg - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_of_one_wraps_to_zero() {
        let ring = camera_ring(1, 0.0).unwrap();
        assert_eq!(ring.len(), 1);
        assert_eq!(ring[0].azimuth_deg, 0.0);
    }

    #[test]
    fn ring_rejects_zero_views() {
        assert!(camera_ring(0, 0.0).is_err());
    }

    #[test]
    fn frontal_subset_of_36_ring() {
        let ring = camera_ring(36, 20.0).unwrap();
        let mut az: Vec<f64> = frontal_subset(&ring).iter().map(|c| c.azimuth_deg).collect();
        az.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(az, vec![0.0, 10.0, 20.0, 30.0, 340.0, 350.0]);
    }

    #[test]
    fn empty_cloud_renders_black() {
        let img = render_depth(
            &PointCloud::new(vec![]),
            &Camera::new(0.0, 0.0),
            16,
            1.0,
        )
        .unwrap();
        assert!(img.pixels.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_origin_point_splats_at_center() {
        let s = 64;
        let img = render_depth(
            &PointCloud::new(vec![[0.0; 3]]),
            &Camera::new(0.0, 0.0),
            s,
            1.0,
        )
        .unwrap();
        for row in [s / 2 - 1, s / 2] {
            for col in [s / 2 - 1, s / 2] {
                assert!(img.get(row, col) > 0.0, "pixel ({row},{col}) empty");
            }
        }
        let lit = img.pixels.iter().filter(|&&v| v > 0.0).count();
        assert!(lit <= 9, "splat too large: {lit} pixels");
    }

    #[test]
    fn z_buffer_keeps_nearer_point() {
        // Camera at azimuth 0, elevation 0 looks along -x: larger x is nearer.
        let near = [0.5, 0.0, 0.0];
        let far = [-0.5, 0.0, 0.0];
        let cam = Camera::new(0.0, 0.0);
        let img_both = render_depth(&PointCloud::new(vec![far, near]), &cam, 32, 1.0).unwrap();
        let img_near = render_depth(&PointCloud::new(vec![near]), &cam, 32, 1.0).unwrap();
        assert_eq!(img_both.pixels, img_near.pixels);
    }

    #[test]
    fn pixels_stay_in_unit_interval() {
        let pc = crate::geom::gen_shape(1, 3, 400).unwrap();
        for cam in camera_ring(6, 20.0).unwrap() {
            let img = render_depth(&pc, &cam, 48, 1.0).unwrap();
            assert!(img.pixels.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn render_rejects_tiny_image() {
        let pc = PointCloud::new(vec![[0.0; 3]]);
        assert!(render_depth(&pc, &Camera::new(0.0, 0.0), 7, 1.0).is_err());
    }

    #[test]
    fn pgm_header_and_payload() {
        let img = render_depth(
            &PointCloud::new(vec![[0.0; 3]]),
            &Camera::new(0.0, 0.0),
            8,
            0.5,
        )
        .unwrap();
        let pgm = img.to_pgm();
        assert!(pgm.starts_with(b"P5\n8 8\n255\n"));
        assert_eq!(pgm.len(), b"P5\n8 8\n255\n".len() + 64);
    }

    /// Rotating the cloud about z by +theta equals rendering at azimuth
    /// a - theta, up to one pixel of splat displacement.
    ///
    /// The test cloud is thinned so that no two splats interact in either
    /// view; each lit pixel then traces to exactly one point.
    #[test]
    fn azimuth_rotation_equivalence() {
        use rand::Rng;
        let s = 256;
        let a = 75.0;
        let theta = 35.0;
        let cam_a = Camera::new(a, 20.0);
        let cam_b = Camera::new(a - theta, 20.0);
        let mut rng = crate::rng::rng_from(404);
        let mut kept: Vec<[f64; 3]> = Vec::new();
        while kept.len() < 40 {
            let p = [
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.6..0.6),
            ];
            let sep_ok = |q: [f64; 3]| {
                for cam in [&cam_a, &cam_b] {
                    let (u1, v1, _) = to_camera_frame(p, cam);
                    let (u2, v2, _) = to_camera_frame(q, cam);
                    let d = ((u1 - u2).powi(2) + (v1 - v2).powi(2)).sqrt() * s as f64 / 2.0;
                    if d < 6.0 {
                        return false;
                    }
                }
                true
            };
            if kept.iter().all(|&q| sep_ok(q)) {
                kept.push(p);
            }
        }
        let pc = PointCloud::new(kept);
        let s = s as usize;
        let img_rotated = render_depth(&rotate_z(&pc, theta), &Camera::new(a, 20.0), s, 1.0).unwrap();
        let img_shifted = render_depth(&pc, &Camera::new(a - theta, 20.0), s, 1.0).unwrap();
        let lit = |img: &DepthImage, r: usize, c: usize| img.get(r, c) > 0.0;
        let near_match = |from: &DepthImage, to: &DepthImage, r: usize, c: usize| -> bool {
            let v = from.get(r, c);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr >= 0 && cc >= 0 && (rr as usize) < s && (cc as usize) < s {
                        let w = to.get(rr as usize, cc as usize);
                        if w > 0.0 && (v - w).abs() < 1e-6 {
                            return true;
                        }
                    }
                }
            }
            false
        };
        for r in 0..s {
            for c in 0..s {
                if lit(&img_rotated, r, c) {
                    assert!(near_match(&img_rotated, &img_shifted, r, c), "pixel ({r},{c})");
                }
                if lit(&img_shifted, r, c) {
                    assert!(near_match(&img_shifted, &img_rotated, r, c), "pixel ({r},{c})");
                }
            }
        }
    }
}
