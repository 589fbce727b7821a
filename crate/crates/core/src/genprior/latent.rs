//! Latent codes and their neural-track record.
//!
//! Layout, little-endian: `u32 d`, `u64 generator seed`, `u16 width`,
//! `u16 height`, `f32 scale`, then `d` values `i16 round(z / scale * 32767)`.
//! `scale` is the largest magnitude in `z`, rounded up to an `f32`.

use super::GeneratorSpec;
use crate::error::{Error, Result};

pub const LATENT_HEADER_LEN: usize = 20;
const Q_MAX: f64 = 32767.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub z: Vec<f64>,
    pub generator_seed: u64,
    pub width: usize,
    pub height: usize,
}

impl LatentCode {
    pub fn new(z: Vec<f64>, spec: &GeneratorSpec) -> Self {
        LatentCode { z, generator_seed: spec.seed, width: spec.width, height: spec.height }
    }

    pub fn zeros(spec: &GeneratorSpec) -> Self {
        Self::new(vec![0.0; spec.latent_dim], spec)
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// Serialized size in bytes.
    pub fn byte_len(&self) -> usize {
        LATENT_HEADER_LEN + 2 * self.z.len()
    }

    /// Checks that this code belongs to a generator built from `spec`.
    pub fn check_spec(&self, spec: &GeneratorSpec) -> Result<()> {
        if self.z.len() != spec.latent_dim
            || self.generator_seed != spec.seed
            || (self.width, self.height) != (spec.width, spec.height)
        {
            return Err(Error::format(format!(
                "latent (d={}, seed={}, {}x{}) does not match the generator (d={}, seed={}, {}x{})",
                self.z.len(),
                self.generator_seed,
                self.width,
                self.height,
                spec.latent_dim,
                spec.seed,
                spec.width,
                spec.height
            )));
        }
        Ok(())
    }

    /// The code as it reads back after serialization.
    pub fn quantized(&self) -> Result<LatentCode> {
        deserialize_latent(&serialize_latent(self)?)
    }
}

fn scale_for(z: &[f64]) -> f32 {
    let max = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return 1.0;
    }
    let s = max as f32;
    if f64::from(s) < max {
        f32::from_bits(s.to_bits() + 1)
    } else {
        s
    }
}

pub fn serialize_latent(code: &LatentCode) -> Result<Vec<u8>> {
    if code.z.iter().any(|v| !v.is_finite()) {
        return Err(Error::precondition("latent has non-finite values"));
    }
    let d = u32::try_from(code.z.len()).map_err(|_| Error::precondition("latent dimension exceeds u32"))?;
    let w = u16::try_from(code.width).map_err(|_| Error::precondition("width exceeds u16"))?;
    let h = u16::try_from(code.height).map_err(|_| Error::precondition("height exceeds u16"))?;
    let scale = scale_for(&code.z);
    let mut out = Vec::with_capacity(code.byte_len());
    out.extend_from_slice(&d.to_le_bytes());
    out.extend_from_slice(&code.generator_seed.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&scale.to_le_bytes());
    let s = f64::from(scale);
    for &v in &code.z {
        let q = (v / s * Q_MAX).round().clamp(-Q_MAX, Q_MAX) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    Ok(out)
}

pub fn deserialize_latent(bytes: &[u8]) -> Result<LatentCode> {
    let header = bytes.get(..LATENT_HEADER_LEN).ok_or(Error::Truncated { offset: bytes.len() })?;
    let d = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
    let generator_seed = u64::from_le_bytes(header[4..12].try_into().unwrap());
    let width = usize::from(u16::from_le_bytes([header[12], header[13]]));
    let height = usize::from(u16::from_le_bytes([header[14], header[15]]));
    let scale = f32::from_le_bytes(header[16..20].try_into().unwrap());
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::format(format!("latent scale {scale} is not a positive finite number")));
    }
    let expected = LATENT_HEADER_LEN + 2 * d;
    if bytes.len() < expected {
        return Err(Error::Truncated { offset: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::format(format!("{} trailing bytes after the latent", bytes.len() - expected)));
    }
    let s = f64::from(scale);
    let z = bytes[LATENT_HEADER_LEN..]
        .chunks_exact(2)
        .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) * s / Q_MAX)
        .collect();
    Ok(LatentCode { z, generator_seed, width, height })
}
