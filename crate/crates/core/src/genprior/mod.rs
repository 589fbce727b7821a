//! Deterministic generative prior.
//!
//! `G(z) = sigmoid(W2 tanh(W1 z + b1) + b2)` with weights drawn once from a
//! seeded stream and never trained. Each column of `W2` is a smooth image (a
//! few low-frequency cosines defined in normalized coordinates), so the
//! generator produces smooth pictures at any resolution. In two-stage mode
//! `G` runs at half resolution and is followed by a bilinear 2x upsampler.

mod invert;
mod latent;

pub use invert::{invert, minimize, Adam, Inversion, Minimized, OptimizerConfig, LSB_MSE};
pub use latent::{deserialize_latent, serialize_latent, LatentCode, LATENT_HEADER_LEN};

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::diff::{upsample2x_raster, DiffTensor, Tape};
use crate::error::{Error, Result};
use crate::frame::Frame;

pub const DEFAULT_LATENT_DIM: usize = 1024;
pub const DEFAULT_HIDDEN: usize = 256;
pub const DEFAULT_GENERATOR_SEED: u64 = 42;

const WAVES_PER_BASIS: usize = 3;
const MAX_FREQ: i32 = 6;
const BASIS_GAIN: f64 = 0.6;
const BIAS_STD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub latent_dim: usize,
    pub hidden: usize,
    /// Full output resolution.
    pub width: usize,
    pub height: usize,
    /// Generate at half resolution and upsample.
    pub two_stage: bool,
}

impl GeneratorSpec {
    pub fn new(width: usize, height: usize) -> Self {
        GeneratorSpec {
            seed: DEFAULT_GENERATOR_SEED,
            latent_dim: DEFAULT_LATENT_DIM,
            hidden: DEFAULT_HIDDEN,
            width,
            height,
            two_stage: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.hidden == 0 {
            return Err(Error::precondition("latent dimension and hidden width must be positive"));
        }
        if self.width < 2 || self.height < 2 {
            return Err(Error::precondition(format!("generator output {}x{} is too small", self.width, self.height)));
        }
        if self.two_stage && (!self.width.is_multiple_of(2) || !self.height.is_multiple_of(2)) {
            return Err(Error::precondition(format!(
                "two-stage generation needs even dimensions, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Resolution of the generator network itself.
    pub fn lowres_dims(&self) -> (usize, usize) {
        if self.two_stage {
            (self.width / 2, self.height / 2)
        } else {
            (self.width, self.height)
        }
    }
}

/// Materialized generator weights for a [`GeneratorSpec`].
#[derive(Debug, Clone)]
pub struct Generator {
    spec: GeneratorSpec,
    /// `hidden x latent_dim`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// One low-resolution image per hidden unit.
    basis: Vec<f64>,
    b2: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Generator {
    pub fn new(spec: GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (d, hid) = (spec.latent_dim, spec.hidden);
        let w1_dist = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("valid std");
        let w1 = (0..hid * d).map(|_| w1_dist.sample(&mut rng)).collect();
        let b1_dist = Normal::new(0.0, BIAS_STD).expect("valid std");
        let b1 = (0..hid).map(|_| b1_dist.sample(&mut rng)).collect();

        // Basis images are defined on [0, 1]^2, so both resolutions see the same functions.
        let (lw, lh) = spec.lowres_dims();
        let unit = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let amp_dist = Normal::new(0.0, 1.0).expect("valid std");
        let mut basis = vec![0.0; hid * lw * lh];
        for img in basis.chunks_exact_mut(lw * lh) {
            for _ in 0..WAVES_PER_BASIS {
                let fx = f64::from(rng.random_range(-MAX_FREQ..=MAX_FREQ));
                let fy = f64::from(rng.random_range(0..=MAX_FREQ));
                let amp = BASIS_GAIN * amp_dist.sample(&mut rng) / (1.0 + 0.5 * fx.hypot(fy));
                let phase = rng.random_range(0.0..TAU);
                for y in 0..lh {
                    let v = unit(y, lh);
                    for x in 0..lw {
                        img[y * lw + x] += amp * (TAU * (fx * unit(x, lw) + fy * v) + phase).cos();
                    }
                }
            }
        }
        let b2 = vec![0.0; lw * lh];
        Ok(Generator { spec, w1, b1, basis, b2 })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    fn check_latent(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.spec.latent_dim {
            return Err(Error::Dimension { expected: (self.spec.latent_dim, 1), actual: (z.len(), 1) });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("latent has non-finite values"));
        }
        Ok(())
    }

    /// Hidden activations and the generated low-resolution raster.
    fn forward(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.spec.latent_dim;
        let hidden: Vec<f64> = self
            .w1
            .chunks_exact(d)
            .zip(&self.b1)
            .map(|(row, b)| (row.iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + b).tanh())
            .collect();
        let mut pre = self.b2.clone();
        let n = pre.len();
        for (img, &hj) in self.basis.chunks_exact(n).zip(&hidden) {
            pre.iter_mut().zip(img).for_each(|(p, b)| *p += hj * b);
        }
        let out = pre.into_iter().map(sigmoid).collect();
        (hidden, out)
    }

    /// Vector-Jacobian product of the low-resolution generator at a recorded state.
    fn vjp(&self, hidden: &[f64], out: &[f64], g_out: &[f64]) -> Vec<f64> {
        let n = out.len();
        let g_pre: Vec<f64> = g_out.iter().zip(out).map(|(g, y)| g * y * (1.0 - y)).collect();
        let d = self.spec.latent_dim;
        let mut g_z = vec![0.0; d];
        for ((img, row), &hj) in self.basis.chunks_exact(n).zip(self.w1.chunks_exact(d)).zip(hidden) {
            let g_h: f64 = img.iter().zip(&g_pre).map(|(b, g)| b * g).sum();
            let g_a = g_h * (1.0 - hj * hj);
            if g_a != 0.0 {
                g_z.iter_mut().zip(row).for_each(|(gz, w)| *gz += g_a * w);
            }
        }
        g_z
    }

    /// `G(z)` at the generator's own resolution.
    pub fn generate_lowres(&self, z: &[f64]) -> Result<Frame> {
        self.check_latent(z)?;
        let (lw, lh) = self.spec.lowres_dims();
        Frame::new(lw, lh, self.forward(z).1)
    }

    /// Records `G(z)` on a tape; `z` must be a `latent_dim x 1` tensor.
    pub fn record_lowres<'a>(&'a self, tape: &mut Tape<'a>, z: DiffTensor) -> Result<DiffTensor> {
        if z.dims() != (self.spec.latent_dim, 1) {
            return Err(Error::Dimension { expected: (self.spec.latent_dim, 1), actual: z.dims() });
        }
        self.check_latent(tape.value(z))?;
        let (hidden, out) = self.forward(tape.value(z));
        let (lw, lh) = self.spec.lowres_dims();
        let cached = out.clone();
        tape.custom(z, out, lw, lh, move |g| self.vjp(&hidden, &cached, g))
    }

    /// Records the full keyframe chain: generate, upsample (two-stage), clip to `[0, 1]`.
    pub fn record_iframe<'a>(&'a self, tape: &mut Tape<'a>, z: DiffTensor) -> Result<DiffTensor> {
        let mut x = self.record_lowres(tape, z)?;
        if self.spec.two_stage {
            x = tape.upsample2x(x);
        }
        Ok(tape.d_clip(x, 0.0, 1.0))
    }

    /// The generated keyframe in real form.
    pub fn generate_iframe(&self, z: &[f64]) -> Result<Frame> {
        self.check_latent(z)?;
        let (lw, lh) = self.spec.lowres_dims();
        let (_, mut data) = self.forward(z);
        if self.spec.two_stage {
            data = upsample2x_raster(&data, lw, lh);
        }
        data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Frame::new(self.spec.width, self.spec.height, data)
    }
}
