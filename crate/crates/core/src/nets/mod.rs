//! Permutation-invariant point-cloud encoder and class-conditional
//! denoiser, with exact reverse-mode gradients.
//!
//! Both networks are small tanh MLPs. The encoder applies a shared
//! per-point network (3 -> H -> H -> D_z) and max-pools coordinate-wise
//! over points, so it is a set function: any permutation or duplication of
//! points leaves the output bit-identical. The denoiser maps
//! `[z_t ; time embedding ; class embedding] -> predicted noise`.
//!
//! Parameters are kept in `f64` for exact gradient checks, but every
//! stored value is snapped to its nearest `f32` (at initialization and
//! after each optimizer step), so 32-bit checkpoints round-trip without
//! loss.

mod backprop;

pub use backprop::{
    denoiser_loss_and_grad, joint_loss_and_grad, CloudBatchItem, DenoiserGrad, EncoderGrad,
    Gradient, LatentBatchItem,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::schedule::ConditionalDenoiser;

/// Round to the nearest `f32`-representable value.
pub(crate) fn snap(x: f64) -> f64 {
    x as f32 as f64
}

/// Encoder layer sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    /// Width of the two hidden per-point layers.
    pub hidden: usize,
    /// Output (latent) dimension D_z.
    pub latent: usize,
}

/// Pointwise MLP + coordinate-wise max pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub dims: EncoderDims,
    /// hidden x 3
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// hidden x hidden
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// latent x hidden
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

/// Denoiser layer sizes and conditioning table shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenoiserDims {
    /// Dimension of the vectors being denoised.
    pub latent: usize,
    /// Width of the two hidden trunk layers.
    pub hidden: usize,
    /// Conditioning labels, including any complement labels.
    pub classes: usize,
    /// Class embedding width D_e.
    pub class_embed: usize,
    /// Sinusoidal time embedding width D_t (even).
    pub time_embed: usize,
    /// Schedule length T the time embedding is normalized by.
    pub t_steps: usize,
}

impl DenoiserDims {
    pub fn input_dim(&self) -> usize {
        self.latent + self.time_embed + self.class_embed
    }

    fn validate(&self) -> Result<()> {
        if self.latent == 0 || self.hidden == 0 || self.classes == 0 || self.class_embed == 0 {
            return Err(Error::InvalidArgument(
                "denoiser dimensions must all be >= 1".into(),
            ));
        }
        if self.time_embed < 2 || self.time_embed % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "time embedding width {} must be even and >= 2",
                self.time_embed
            )));
        }
        if self.t_steps == 0 {
            return Err(Error::InvalidArgument("t_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Class-conditional noise predictor: embedding table plus tanh trunk.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    pub dims: DenoiserDims,
    /// classes x class_embed
    pub embed: Vec<f64>,
    /// hidden x input_dim
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// hidden x hidden
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// latent x hidden
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

/// Xavier-uniform draw, snapped to f32 precision.
fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols)
        .map(|_| snap(rng.random_range(-bound..bound)))
        .collect()
}

impl EncoderParams {
    /// Seeded Xavier-uniform weights (biases zero).
    pub fn init(dims: EncoderDims, rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.hidden == 0 || dims.latent == 0 {
            return Err(Error::InvalidArgument(
                "encoder dimensions must be >= 1".into(),
            ));
        }
        Ok(Self {
            dims,
            w1: init_matrix(rng, dims.hidden, 3),
            b1: vec![0.0; dims.hidden],
            w2: init_matrix(rng, dims.hidden, dims.hidden),
            b2: vec![0.0; dims.hidden],
            w3: init_matrix(rng, dims.latent, dims.hidden),
            b3: vec![0.0; dims.latent],
        })
    }

    /// Tensor views in checkpoint order.
    pub fn tensors(&self) -> [(&'static str, &Vec<f64>); 6] {
        [
            ("enc.w1", &self.w1),
            ("enc.b1", &self.b1),
            ("enc.w2", &self.w2),
            ("enc.b2", &self.b2),
            ("enc.w3", &self.w3),
            ("enc.b3", &self.b3),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }
}

impl DenoiserParams {
    /// Seeded Xavier-uniform weights and embedding table (biases zero).
    pub fn init(dims: DenoiserDims, rng: &mut ChaCha8Rng) -> Result<Self> {
        dims.validate()?;
        Ok(Self {
            dims,
            embed: init_matrix(rng, dims.classes, dims.class_embed),
            w1: init_matrix(rng, dims.hidden, dims.input_dim()),
            b1: vec![0.0; dims.hidden],
            w2: init_matrix(rng, dims.hidden, dims.hidden),
            b2: vec![0.0; dims.hidden],
            w3: init_matrix(rng, dims.latent, dims.hidden),
            b3: vec![0.0; dims.latent],
        })
    }

    pub fn tensors(&self) -> [(&'static str, &Vec<f64>); 7] {
        [
            ("den.embed", &self.embed),
            ("den.w1", &self.w1),
            ("den.b1", &self.b1),
            ("den.w2", &self.w2),
            ("den.b2", &self.b2),
            ("den.w3", &self.w3),
            ("den.b3", &self.b3),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 7] {
        [
            &mut self.embed,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    /// Row `c` of the class embedding table.
    pub fn embedding_row(&self, c: usize) -> &[f64] {
        let w = self.dims.class_embed;
        &self.embed[c * w..(c + 1) * w]
    }

    /// Overwrite row `c` of the class embedding table.
    pub fn set_embedding_row(&mut self, c: usize, row: &[f64]) {
        let w = self.dims.class_embed;
        self.embed[c * w..(c + 1) * w].copy_from_slice(row);
    }
}

/// y = W x + b for row-major `w` of shape `out x in`.
pub(crate) fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let in_dim = x.len();
    let mut y = b.to_vec();
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut acc = 0.0;
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *yo += acc;
    }
    y
}

pub(crate) fn tanh_inplace(v: &mut [f64]) {
    for x in v {
        *x = x.tanh();
    }
}

/// Sinusoidal embedding of `t / t_steps` with geometric frequencies
/// 1, 2, 4, ... : `[sin(2 pi f_k t/T), cos(2 pi f_k t/T), ...]`.
pub fn time_embedding(t: usize, t_steps: usize, dim: usize) -> Vec<f64> {
    let pos = t as f64 / t_steps as f64;
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim / 2 {
        let angle = std::f64::consts::TAU * (1u64 << k) as f64 * pos;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    out
}

/// Assemble the denoiser input `[z_t ; time embedding ; class embedding]`.
fn denoiser_input(den: &DenoiserParams, z_t: &[f64], t: usize, class: usize) -> Result<Vec<f64>> {
    let d = &den.dims;
    if class >= d.classes {
        return Err(Error::UnknownClass {
            id: class,
            total: d.classes,
        });
    }
    if z_t.len() != d.latent {
        return Err(Error::DimensionMismatch(format!(
            "z_t has {} coordinates, denoiser expects {}",
            z_t.len(),
            d.latent
        )));
    }
    if t == 0 || t > d.t_steps {
        return Err(Error::InvalidArgument(format!(
            "timestep {t} outside 1..={}",
            d.t_steps
        )));
    }
    let mut v = Vec::with_capacity(d.input_dim());
    v.extend_from_slice(z_t);
    v.extend(time_embedding(t, d.t_steps, d.time_embed));
    v.extend_from_slice(den.embedding_row(class));
    Ok(v)
}

/// Predict the noise in `z_t` at timestep `t` under conditioning `class`.
pub fn denoise(den: &DenoiserParams, z_t: &[f64], t: usize, class: usize) -> Result<Vec<f64>> {
    let v = denoiser_input(den, z_t, t, class)?;
    let mut h1 = affine(&den.w1, &den.b1, &v);
    tanh_inplace(&mut h1);
    let mut h2 = affine(&den.w2, &den.b2, &h1);
    tanh_inplace(&mut h2);
    Ok(affine(&den.w3, &den.b3, &h2))
}

impl ConditionalDenoiser for DenoiserParams {
    fn latent_dim(&self) -> usize {
        self.dims.latent
    }

    fn num_classes(&self) -> usize {
        self.dims.classes
    }

    fn denoise(&self, z_t: &[f64], t: usize, class: usize) -> Result<Vec<f64>> {
        denoise(self, z_t, t, class)
    }
}

/// Fold per-coordinate standardization of the encoder's outputs over a
/// reference set into its output layer: afterwards the reference clouds'
/// latents have zero mean and unit variance per coordinate, and `encode`
/// needs no separate normalization step. Sound because coordinate-wise
/// max pooling commutes with positive affine maps of the per-point
/// outputs.
pub fn standardize_encoder(enc: &mut EncoderParams, clouds: &[&PointCloud]) -> Result<()> {
    if clouds.is_empty() {
        return Err(Error::Empty("reference cloud list"));
    }
    let dl = enc.dims.latent;
    let latents: Vec<Vec<f64>> = clouds
        .iter()
        .map(|pc| encode(enc, pc))
        .collect::<Result<_>>()?;
    let n = latents.len() as f64;
    let mut mean = vec![0.0; dl];
    for z in &latents {
        for (m, v) in mean.iter_mut().zip(z) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; dl];
    for z in &latents {
        for d in 0..dl {
            std[d] += (z[d] - mean[d]).powi(2) / n;
        }
    }
    let h = enc.dims.hidden;
    for d in 0..dl {
        let s = std[d].sqrt().max(1e-6);
        for w in &mut enc.w3[d * h..(d + 1) * h] {
            *w = snap(*w / s);
        }
        enc.b3[d] = snap((enc.b3[d] - mean[d]) / s);
    }
    Ok(())
}

/// Encode a point cloud into its global latent vector: shared pointwise
/// network, then coordinate-wise max over points.
pub fn encode(enc: &EncoderParams, pc: &PointCloud) -> Result<Vec<f64>> {
    if pc.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    let mut z0 = vec![f64::NEG_INFINITY; enc.dims.latent];
    for p in &pc.points {
        let mut h1 = affine(&enc.w1, &enc.b1, p);
        tanh_inplace(&mut h1);
        let mut h2 = affine(&enc.w2, &enc.b2, &h1);
        tanh_inplace(&mut h2);
        let y = affine(&enc.w3, &enc.b3, &h2);
        for (zd, yd) in z0.iter_mut().zip(&y) {
            if *yd > *zd {
                *zd = *yd;
            }
        }
    }
    Ok(z0)
}
