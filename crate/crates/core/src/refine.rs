//! Joint refinement of the keyframe latent through the frozen decode chain,
//! and the per-GOP transcoding pipeline built around it.

use std::time::{Duration, Instant};

use crate::codec::{decode_gop, decode_gop_frozen, CodecConfig, CodedGop, FrozenGop};
use crate::diff::{gop_loss, reconstruct_gop_diff, Tape};
use crate::error::{Error, Result};
use crate::frame::{gop_psnr, psnr, Frame};
use crate::genprior::{invert, minimize, Generator, LatentCode, OptimizerConfig, LSB_MSE};
use crate::ratectl::{allocate, AllocationResult, RateBudget};

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub iters: usize,
    pub lr: f64,
    /// Weight of the keyframe's own MSE term.
    pub i_frame_weight: f64,
    /// Weight of each P/B frame in display order; missing entries default to 1.
    pub pb_weights: Vec<f64>,
    /// Allocation plus refinement rounds; later rounds re-encode against the refined keyframe.
    pub outer_passes: usize,
    /// Round the keyframe and the displayed frames to 8 bits in the forward
    /// pass (straight-through backward), so the objective is the one the
    /// integer decoder delivers. Off gives the smooth all-real objective.
    pub round_forward: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            iters: 400,
            lr: 5e-3,
            i_frame_weight: 1.0,
            pb_weights: Vec::new(),
            outer_passes: 1,
            round_forward: true,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let weights_ok =
            std::iter::once(&self.i_frame_weight).chain(&self.pb_weights).all(|w| w.is_finite() && *w >= 0.0);
        if !weights_ok {
            return Err(Error::precondition("refinement weights must be finite and non-negative"));
        }
        if self.outer_passes == 0 {
            return Err(Error::precondition("outer_passes must be at least 1"));
        }
        self.optimizer().validate()
    }

    /// Loss weights for a GOP of `n` frames, keyframe first.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|t| if t == 0 { self.i_frame_weight } else { self.pb_weights.get(t - 1).copied().unwrap_or(1.0) })
            .collect()
    }

    fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig { iters: self.iters, lr: self.lr, ..OptimizerConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    pub trace: Vec<f64>,
    /// Per-frame PSNR of the integer decode against the starting and the refined latent.
    pub psnr_before: Vec<f64>,
    pub psnr_after: Vec<f64>,
    pub gop_psnr_before: f64,
    pub gop_psnr_after: f64,
    pub wall_time: Duration,
    pub restarted: bool,
}

impl RefineReport {
    pub fn initial_loss(&self) -> f64 {
        self.trace[0]
    }

    pub fn best_loss(&self) -> f64 {
        self.trace.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn integer_decode(
    generator: &Generator,
    z: &LatentCode,
    coded: &CodedGop,
    gop: &[Frame],
    cfg: &CodecConfig,
) -> Result<(Vec<f64>, f64)> {
    let i_frame = generator.generate_iframe(&z.z)?;
    let recon = decode_gop(coded, Some(&i_frame), i_frame.dims(), cfg)?;
    let per_frame = recon.iter().zip(gop).map(|(r, s)| psnr(r, s)).collect::<Result<Vec<_>>>()?;
    Ok((per_frame, gop_psnr(&recon, gop)?))
}

fn loss_and_grad(
    generator: &Generator,
    frozen: &FrozenGop,
    gop: &[Frame],
    weights: &[f64],
    round_forward: bool,
    z: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let leaf = tape.leaf(z.to_vec(), z.len(), 1, true)?;
    let mut i_frame = generator.record_iframe(&mut tape, leaf)?;
    if round_forward {
        i_frame = tape.d_round_ste(i_frame);
    }
    let mut recons = reconstruct_gop_diff(&mut tape, i_frame, frozen)?;
    if round_forward {
        for r in recons.iter_mut().skip(1) {
            *r = tape.d_round_ste(*r);
        }
    }
    let loss = gop_loss(&mut tape, &recons, gop, weights)?;
    let grads = tape.backward(loss)?;
    Ok((tape.scalar(loss), grads.dense(leaf)))
}

/// Optimizes `z0` against the weighted reconstruction loss of the whole GOP,
/// with `coded`'s motion, residuals and deblocking masks held fixed.
///
/// `coded` must have been encoded against `generate_iframe(z0)` without an I
/// unit. Returns the best latent seen (unquantized).
pub fn refine_latent(
    z0: &LatentCode,
    gop: &[Frame],
    coded: &CodedGop,
    generator: &Generator,
    cfg: &CodecConfig,
    rcfg: &RefineConfig,
) -> Result<(LatentCode, RefineReport)> {
    rcfg.validate()?;
    let started = Instant::now();
    let spec = generator.spec();
    z0.check_spec(spec)?;
    if coded.i_unit.is_some() {
        return Err(Error::Structure("refinement needs a GOP coded against an injected keyframe".into()));
    }
    if coded.n_frames() != gop.len() {
        return Err(Error::Structure(format!("{} coded frames for a GOP of {}", coded.n_frames(), gop.len())));
    }
    let reference = generator.generate_iframe(&z0.z)?;
    let (_, frozen) = decode_gop_frozen(coded, Some(&reference), reference.dims(), cfg)?;
    let weights = rcfg.weights(gop.len());

    let floor = weights.iter().sum::<f64>() * LSB_MSE;
    let m = minimize(&z0.z, &rcfg.optimizer(), floor, |z| {
        loss_and_grad(generator, &frozen, gop, &weights, rcfg.round_forward, z)
    })?;
    let refined = LatentCode::new(m.best, spec);
    let (psnr_before, gop_psnr_before) = integer_decode(generator, z0, coded, gop, cfg)?;
    let (psnr_after, gop_psnr_after) = integer_decode(generator, &refined, coded, gop, cfg)?;
    let report = RefineReport {
        trace: m.trace,
        psnr_before,
        psnr_after,
        gop_psnr_before,
        gop_psnr_after,
        wall_time: started.elapsed(),
        restarted: m.restarted,
    };
    Ok((refined, report))
}

/// Everything the container needs for one GOP, plus diagnostics.
#[derive(Debug, Clone)]
pub struct TranscodedGop {
    /// Quantized latent, exactly as it will be serialized.
    pub latent: LatentCode,
    pub coded: CodedGop,
    pub allocation: AllocationResult,
    /// MSE of the inverted keyframe before any refinement.
    pub inversion_loss: f64,
    /// One report per outer pass; empty when refinement is off.
    pub refinements: Vec<RefineReport>,
}

/// Inversion, rate allocation against the generated keyframe, then joint
/// refinement (skipped when `rcfg` is `None`).
///
/// With `outer_passes > 1` the GOP is re-allocated against the refined
/// keyframe and refined again; the emitted pair is the last one.
pub fn transcode_gop(
    gop: &[Frame],
    budget: &RateBudget,
    generator: &Generator,
    cfg: &CodecConfig,
    opt: &OptimizerConfig,
    rcfg: Option<&RefineConfig>,
) -> Result<TranscodedGop> {
    let first = gop.first().ok_or_else(|| Error::precondition("empty GOP"))?;
    let inv = invert(generator, first, opt)?;
    let mut latent = inv.latent.quantized()?;
    let passes = rcfg.map_or(1, |r| r.outer_passes);
    let mut refinements = Vec::new();
    let mut last = None;
    for _ in 0..passes {
        let reference = generator.generate_iframe(&latent.z)?;
        let (coded, allocation) = allocate(gop, &reference, latent.byte_len(), budget, cfg)?;
        if let Some(rcfg) = rcfg {
            let (refined, report) = refine_latent(&latent, gop, &coded, generator, cfg, rcfg)?;
            latent = refined.quantized()?;
            refinements.push(report);
        }
        last = Some((coded, allocation));
    }
    let (coded, allocation) = last.expect("at least one pass");
    Ok(TranscodedGop { latent, coded, allocation, inversion_loss: inv.best_loss, refinements })
}
