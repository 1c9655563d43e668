//! Binary checkpoint format, version 1.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic        6 bytes  "DC3DO\0"
//! version      u16      1
//! has_encoder  u8       0 or 1
//! enc_hidden   u32      encoder hidden width (0 when no encoder)
//! latent       u32      D_z
//! den_hidden   u32      denoiser hidden width
//! classes      u32      conditioning labels (incl. complements)
//! class_embed  u32      D_e
//! time_embed   u32      D_t
//! t_steps      u32      schedule length T
//! beta_min     f64
//! beta_max     f64
//! tensors               f32 values, row-major, in fixed order:
//!                       enc.w1 b1 w2 b2 w3 b3 (if has_encoder),
//!                       den.embed w1 b1 w2 b2 w3 b3
//! ```
//!
//! Values are stored as f32; in-memory parameters are always
//! f32-representable (see `nets`), so a round-trip reproduces the model
//! bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nets::{DenoiserDims, DenoiserParams, EncoderDims, EncoderParams};
use crate::schedule::make_schedule;
use crate::train::ModelParameters;

const MAGIC: &[u8; 6] = b"DC3DO\0";
const VERSION: u16 = 1;

/// Serialize a model to bytes.
pub fn write_checkpoint(model: &ModelParameters) -> Vec<u8> {
    let den = &model.denoiser;
    let (beta_min, beta_max) = model.schedule.beta_range();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(model.encoder.is_some() as u8);
    let enc_hidden = model.encoder.as_ref().map_or(0, |e| e.dims.hidden);
    for dim in [
        enc_hidden,
        den.dims.latent,
        den.dims.hidden,
        den.dims.classes,
        den.dims.class_embed,
        den.dims.time_embed,
        den.dims.t_steps,
    ] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&beta_min.to_le_bytes());
    out.extend_from_slice(&beta_max.to_le_bytes());
    let mut push_tensor = |t: &[f64]| {
        for &v in t {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    };
    if let Some(enc) = &model.encoder {
        for (_, t) in enc.tensors() {
            push_tensor(t);
        }
    }
    for (_, t) in den.tensors() {
        push_tensor(t);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Truncated {
                tensor: what.to_string(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn tensor(&mut self, len: usize, name: &str) -> Result<Vec<f64>> {
        let bytes = self.take(4 * len, name)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

/// Deserialize a model from bytes.
pub fn read_checkpoint(buf: &[u8]) -> Result<ModelParameters> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(6, "header")? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u16("header")?;
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let has_encoder = match r.take(1, "header")?[0] {
        0 => false,
        1 => true,
        other => {
            return Err(Error::BadDimensions(format!(
                "has_encoder flag must be 0 or 1, got {other}"
            )))
        }
    };
    let enc_hidden = r.u32("header")? as usize;
    let latent = r.u32("header")? as usize;
    let den_hidden = r.u32("header")? as usize;
    let classes = r.u32("header")? as usize;
    let class_embed = r.u32("header")? as usize;
    let time_embed = r.u32("header")? as usize;
    let t_steps = r.u32("header")? as usize;
    let beta_min = r.f64("header")?;
    let beta_max = r.f64("header")?;

    if latent == 0 || den_hidden == 0 || classes == 0 || class_embed == 0 {
        return Err(Error::BadDimensions(
            "header declares a zero dimension".into(),
        ));
    }
    if time_embed < 2 || time_embed % 2 != 0 {
        return Err(Error::BadDimensions(format!(
            "time embedding width {time_embed} must be even and >= 2"
        )));
    }
    if has_encoder && enc_hidden == 0 {
        return Err(Error::BadDimensions(
            "encoder flagged present with zero hidden width".into(),
        ));
    }
    let schedule = make_schedule(t_steps, beta_min, beta_max)
        .map_err(|e| Error::BadDimensions(e.to_string()))?;

    let encoder = if has_encoder {
        let dims = EncoderDims {
            hidden: enc_hidden,
            latent,
        };
        Some(EncoderParams {
            dims,
            w1: r.tensor(enc_hidden * 3, "enc.w1")?,
            b1: r.tensor(enc_hidden, "enc.b1")?,
            w2: r.tensor(enc_hidden * enc_hidden, "enc.w2")?,
            b2: r.tensor(enc_hidden, "enc.b2")?,
            w3: r.tensor(latent * enc_hidden, "enc.w3")?,
            b3: r.tensor(latent, "enc.b3")?,
        })
    } else {
        None
    };
    let dims = DenoiserDims {
        latent,
        hidden: den_hidden,
        classes,
        class_embed,
        time_embed,
        t_steps,
    };
    let denoiser = DenoiserParams {
        dims,
        embed: r.tensor(classes * class_embed, "den.embed")?,
        w1: r.tensor(den_hidden * dims.input_dim(), "den.w1")?,
        b1: r.tensor(den_hidden, "den.b1")?,
        w2: r.tensor(den_hidden * den_hidden, "den.w2")?,
        b2: r.tensor(den_hidden, "den.b2")?,
        w3: r.tensor(latent * den_hidden, "den.w3")?,
        b3: r.tensor(latent, "den.b3")?,
    };
    if r.pos != buf.len() {
        return Err(Error::BadDimensions(format!(
            "{} trailing bytes after the last tensor",
            buf.len() - r.pos
        )));
    }
    Ok(ModelParameters {
        encoder,
        denoiser,
        schedule,
    })
}

/// Write a checkpoint file.
pub fn save_checkpoint(model: &ModelParameters, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&write_checkpoint(model))?;
    Ok(())
}

/// Read a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<ModelParameters> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    read_checkpoint(&buf)
}
