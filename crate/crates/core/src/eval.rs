//! Method comparison over a bitrate sweep.

use crate::codec::{decode_gop, encode_gop_with_recon, CodecConfig};
use crate::container::{decode_stream, DecodeMode, PipelineConfig};
use crate::encode::{encode_sequence, EncoderConfig, Method};
use crate::error::{Error, Result};
use crate::frame::{gop_psnr, psnr_from_mse, Frame, VideoSequence};

/// A named encoder setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub cfg: EncoderConfig,
}

impl Variant {
    pub fn new(name: impl Into<String>, cfg: EncoderConfig) -> Self {
        Variant { name: name.into(), cfg }
    }
}

/// The four methods on top of `base`, plus the single-stage generator when
/// `with_single_stage` is set.
pub fn standard_variants(base: &EncoderConfig, with_single_stage: bool) -> Vec<Variant> {
    let mut out: Vec<Variant> = Method::ALL
        .iter()
        .map(|&method| Variant::new(method.name(), EncoderConfig { method, ..base.clone() }))
        .collect();
    if with_single_stage {
        let mut cfg = EncoderConfig { method: Method::Hybrid, ..base.clone() };
        cfg.generator.two_stage = false;
        out.push(Variant::new("no-two-stage", cfg));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub method: String,
    pub kbps: f64,
    /// Mean over GOPs of the pooled per-GOP PSNR.
    pub mean_gop_psnr: f64,
    pub total_bytes: usize,
    /// Average bytes per I (or latent), P and B frame; zero when absent.
    pub avg_bytes: [f64; 3],
    pub within_budget: bool,
}

pub const EVAL_CSV_HEADER: &str =
    "method,kbps,mean_gop_psnr,total_bytes,avg_i_bytes,avg_p_bytes,avg_b_bytes,within_budget";

pub fn rows_to_csv(rows: &[EvalRow]) -> String {
    let mut out = format!("{EVAL_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{},{:.1},{:.1},{:.1},{}\n",
            r.method,
            r.kbps,
            r.mean_gop_psnr,
            r.total_bytes,
            r.avg_bytes[0],
            r.avg_bytes[1],
            r.avg_bytes[2],
            r.within_budget
        ));
    }
    out
}

/// Mean of per-GOP PSNRs for `recon` against `source`, GOPs of `gop_length` frames.
pub fn mean_gop_psnr(recon: &[Frame], source: &[Frame], gop_length: usize) -> Result<f64> {
    if recon.len() != source.len() || recon.is_empty() || gop_length == 0 {
        return Err(Error::precondition("mean_gop_psnr needs equal non-empty sequences"));
    }
    let per_gop = recon
        .chunks(gop_length)
        .zip(source.chunks(gop_length))
        .map(|(r, s)| gop_psnr(r, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_gop.iter().sum::<f64>() / per_gop.len() as f64)
}

/// Encodes, decodes and scores one variant at one rate.
pub fn evaluate(seq: &VideoSequence, variant: &Variant, kbps: f64) -> Result<EvalRow> {
    let enc = encode_sequence(seq, kbps * 1000.0, &variant.cfg)?;
    let (decoded, _) = decode_stream(&enc.bytes, DecodeMode::Direct, PipelineConfig { pipelined: false })?;
    let mut bytes = [0usize; 3];
    let mut counts = [0usize; 3];
    for g in &enc.gops {
        for t in 0..3 {
            bytes[t] += g.bytes_by_type[t];
            counts[t] += g.count_by_type[t];
        }
    }
    let avg_bytes = std::array::from_fn(|t| if counts[t] == 0 { 0.0 } else { bytes[t] as f64 / counts[t] as f64 });
    Ok(EvalRow {
        method: variant.name.clone(),
        kbps,
        mean_gop_psnr: mean_gop_psnr(&decoded.frames, &seq.frames, variant.cfg.codec.gop_length)?,
        total_bytes: enc.gops.iter().map(|g| g.total_bytes).sum(),
        avg_bytes,
        within_budget: enc.all_within_budget(),
    })
}

pub fn eval_sweep(seq: &VideoSequence, variants: &[Variant], kbps: &[f64]) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::with_capacity(variants.len() * kbps.len());
    for &rate in kbps {
        for v in variants {
            rows.push(evaluate(seq, v, rate)?);
        }
    }
    Ok(rows)
}

/// The ablation variants: full pipeline, no refinement, single-stage
/// generator and prompt-only.
pub fn ablation_variants(base: &EncoderConfig) -> Vec<Variant> {
    let mut single = EncoderConfig { method: Method::Hybrid, ..base.clone() };
    single.generator.two_stage = false;
    vec![
        Variant::new("full", EncoderConfig { method: Method::Hybrid, ..base.clone() }),
        Variant::new("no-refine", EncoderConfig { method: Method::NoRefine, ..base.clone() }),
        Variant::new("no-two-stage", single),
        Variant::new("prompt-only", EncoderConfig { method: Method::PromptOnly, ..base.clone() }),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub method: String,
    pub kbps: f64,
    pub mean_gop_psnr: f64,
    pub total_bytes: usize,
    /// Frames per second of a pipelined direct decode.
    pub decode_fps: f64,
    pub within_budget: bool,
}

pub const ABLATION_CSV_HEADER: &str = "method,kbps,mean_gop_psnr,total_bytes,decode_fps,within_budget";

pub fn ablation_to_csv(rows: &[AblationRow]) -> String {
    let mut out = format!("{ABLATION_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{},{:.2},{}\n",
            r.method, r.kbps, r.mean_gop_psnr, r.total_bytes, r.decode_fps, r.within_budget
        ));
    }
    out
}

pub fn ablate(seq: &VideoSequence, variants: &[Variant], kbps: f64) -> Result<Vec<AblationRow>> {
    variants
        .iter()
        .map(|v| {
            let enc = encode_sequence(seq, kbps * 1000.0, &v.cfg)?;
            let (decoded, timing) = decode_stream(&enc.bytes, DecodeMode::Direct, PipelineConfig::default())?;
            Ok(AblationRow {
                method: v.name.clone(),
                kbps,
                mean_gop_psnr: mean_gop_psnr(&decoded.frames, &seq.frames, v.cfg.codec.gop_length)?,
                total_bytes: enc.gops.iter().map(|g| g.total_bytes).sum(),
                decode_fps: decoded.len() as f64 / timing.wall.as_secs_f64().max(1e-9),
                within_budget: enc.all_within_budget(),
            })
        })
        .collect()
}

/// One point of the traditional codec's rate-distortion curve for a single GOP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub qp: u8,
    pub total_bytes: usize,
    pub psnr: f64,
}

/// Lossless I unit plus P/B units at every qp.
pub fn traditional_rd_curve(gop: &[Frame], cfg: &CodecConfig) -> Result<Vec<RdPoint>> {
    let first = gop.first().ok_or_else(|| Error::precondition("empty GOP"))?;
    (0..=cfg.qp_max)
        .map(|qp| {
            let enc = encode_gop_with_recon(gop, first, qp, true, cfg)?;
            debug_assert_eq!(decode_gop(&enc.coded, None, first.dims(), cfg)?, enc.recon);
            Ok(RdPoint { qp, total_bytes: enc.coded.to_bytes().len(), psnr: gop_psnr(&enc.recon, gop)? })
        })
        .collect()
}

/// PSNR of the curve at `bytes`: the best point within `tolerance` (relative)
/// of `bytes`, otherwise linear interpolation between the nearest points
/// on either side. `None` when `bytes` is outside the curve's range.
pub fn psnr_at_bytes(curve: &[RdPoint], bytes: usize, tolerance: f64) -> Option<f64> {
    let b = bytes as f64;
    let close = curve
        .iter()
        .filter(|p| (p.total_bytes as f64 - b).abs() <= tolerance * b)
        .map(|p| p.psnr)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    if close.is_some() {
        return close;
    }
    let below = curve.iter().filter(|p| p.total_bytes <= bytes).max_by_key(|p| p.total_bytes)?;
    let above = curve.iter().filter(|p| p.total_bytes >= bytes).min_by_key(|p| p.total_bytes)?;
    if below.total_bytes == above.total_bytes {
        return Some(below.psnr.max(above.psnr));
    }
    // Interpolate distortion rather than PSNR so lossless end points stay finite.
    let mse = |p: f64| 10f64.powf(-p / 10.0);
    let t = (b - below.total_bytes as f64) / (above.total_bytes - below.total_bytes) as f64;
    Some(psnr_from_mse(mse(below.psnr) + t * (mse(above.psnr) - mse(below.psnr))))
}
