//! GOP encode/decode with an injectable I-frame reference.
//!
//! The I-frame is always an 8-bit frame, coded losslessly as spatial
//! residuals against mid-grey. P/B reconstructions stay real-valued between
//! frames; only the emitted pictures are rounded to 8 bits. Encoder and
//! decoder share [`reconstruct`], which makes the loop closed bit-exactly.

use super::config::{CodecConfig, TRANSFORM_BLOCK as TB};
use super::deblock::{compute_boundary_mask, deblock_raster, BoundaryMask};
use super::motion::{motion_estimate, warp_raster, MotionField};
use super::transform::{dequant_itransform, transform_quant, Block, Coeffs, BLOCK_LEN};
use super::unit::{
    decode_payload, encode_unit, split_units, FrameType, PayloadShape, UnitHeader, UnitPayload, UNIT_HEADER_LEN,
};
use crate::error::{Error, Result};
use crate::frame::Frame;

const MID_GREY: i32 = 128;

/// One P/B picture in coding order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitPlan {
    pub display: usize,
    pub kind: FrameType,
    /// Display indices of the references.
    pub refs: Vec<usize>,
}

/// Coding order for the non-I frames of an `n`-frame GOP.
///
/// Without B-frames every frame is a P referencing its predecessor. With
/// B-frames even indices are P (referencing the previous even frame) and each
/// odd index is a non-referenced B between its two even neighbours; a trailing
/// odd frame without a right neighbour becomes a P.
pub fn gop_plan(n: usize, b_frames: bool) -> Vec<UnitPlan> {
    let mut plan = Vec::with_capacity(n.saturating_sub(1));
    if !b_frames {
        for t in 1..n {
            plan.push(UnitPlan { display: t, kind: FrameType::P, refs: vec![t - 1] });
        }
        return plan;
    }
    let mut t = 2;
    while t < n {
        plan.push(UnitPlan { display: t, kind: FrameType::P, refs: vec![t - 2] });
        plan.push(UnitPlan { display: t - 1, kind: FrameType::B, refs: vec![t - 2, t] });
        t += 2;
    }
    if n >= 2 && (n - 1) % 2 == 1 {
        plan.push(UnitPlan { display: n - 1, kind: FrameType::P, refs: vec![n - 2] });
    }
    plan
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CodedGop {
    /// Lossless I unit, when retained.
    pub i_unit: Option<Vec<u8>>,
    /// P/B units in coding order; their concatenation is the legacy track.
    pub pb_units: Vec<Vec<u8>>,
}

impl CodedGop {
    pub fn n_frames(&self) -> usize {
        1 + self.pb_units.len()
    }

    pub fn legacy_len(&self) -> usize {
        self.pb_units.iter().map(Vec::len).sum()
    }

    pub fn legacy_bytes(&self) -> Vec<u8> {
        self.pb_units.concat()
    }

    pub fn i_unit_len(&self) -> usize {
        self.i_unit.as_ref().map_or(0, Vec::len)
    }

    /// Unit sizes in coding order, I unit first when present.
    pub fn sizes(&self) -> Vec<usize> {
        self.i_unit.iter().chain(&self.pb_units).map(Vec::len).collect()
    }

    /// The I unit (if any) followed by the P/B units.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.i_unit.clone().unwrap_or_default();
        for u in &self.pb_units {
            out.extend_from_slice(u);
        }
        out
    }

    /// Parses a unit stream; a leading I unit becomes `i_unit`.
    pub fn from_bytes(bytes: &[u8]) -> Result<CodedGop> {
        let mut coded = CodedGop::default();
        for (i, (offset, hdr, unit)) in split_units(bytes, 0)?.into_iter().enumerate() {
            match (i, hdr.frame_type) {
                (0, FrameType::I) => coded.i_unit = Some(unit.to_vec()),
                (_, FrameType::I) => {
                    return Err(Error::CorruptUnit { offset, reason: "I unit after the start of a GOP".into() })
                }
                _ => coded.pb_units.push(unit.to_vec()),
            }
        }
        Ok(coded)
    }

    /// Total bytes per frame type, `[I, P, B]`.
    pub fn bytes_by_type(&self) -> [usize; 3] {
        let mut acc = [0usize; 3];
        for unit in self.i_unit.iter().chain(&self.pb_units) {
            acc[unit[0] as usize % 3] += unit.len();
        }
        acc
    }

    /// Count of units per frame type, `[I, P, B]`.
    pub fn count_by_type(&self) -> [usize; 3] {
        let mut acc = [0usize; 3];
        for unit in self.i_unit.iter().chain(&self.pb_units) {
            acc[unit[0] as usize % 3] += 1;
        }
        acc
    }
}

/// Decoded side information of one P/B unit, as frozen for differentiable replay.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenUnit {
    pub plan: UnitPlan,
    pub qp: u8,
    pub fields: Vec<MotionField>,
    /// Dequantized residual raster in `[0, 1]` sample units.
    pub residual: Vec<f64>,
    pub mask: BoundaryMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenGop {
    pub width: usize,
    pub height: usize,
    pub units: Vec<FrozenUnit>,
}

impl FrozenGop {
    pub fn n_frames(&self) -> usize {
        self.units.len() + 1
    }
}

fn blocks_to_raster(blocks: &[Coeffs], qp: u8, w: usize, h: usize) -> Vec<f64> {
    let bx_n = w / TB;
    let mut out = vec![0.0; w * h];
    for (i, coeffs) in blocks.iter().enumerate() {
        let (bx, by) = (i % bx_n, i / bx_n);
        let px = dequant_itransform(coeffs, qp);
        for y in 0..TB {
            for x in 0..TB {
                out[(by * TB + y) * w + bx * TB + x] = px[y * TB + x] / 255.0;
            }
        }
    }
    out
}

fn raster_blocks(w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..h / TB).flat_map(move |by| (0..w / TB).map(move |bx| (bx, by)))
}

/// Motion-compensated prediction from one or two references.
pub(crate) fn predict(refs: &[&[f64]], fields: &[MotionField], w: usize, h: usize) -> Vec<f64> {
    match refs {
        [r] => warp_raster(r, w, h, &fields[0]),
        [a, b] => {
            let pa = warp_raster(a, w, h, &fields[0]);
            let pb = warp_raster(b, w, h, &fields[1]);
            pa.iter().zip(&pb).map(|(x, y)| (x + y) * 0.5).collect()
        }
        _ => unreachable!("P/B units have one or two references"),
    }
}

/// Shared reconstruction: clip(prediction + residual), gate mask, deblock.
fn reconstruct(
    pred: &[f64],
    residual: &[f64],
    qp: u8,
    w: usize,
    h: usize,
    cfg: &CodecConfig,
) -> (Vec<f64>, BoundaryMask) {
    let pre: Vec<f64> = if qp == 0 {
        // Lossless units add integer residuals to the 8-bit prediction.
        pred.iter()
            .zip(residual)
            .map(|(p, r)| (((p * 255.0).round() + (r * 255.0).round()) / 255.0).clamp(0.0, 1.0))
            .collect()
    } else {
        pred.iter().zip(residual).map(|(p, r)| (p + r).clamp(0.0, 1.0)).collect()
    };
    // Lossless units bypass the loop filter.
    let mask = if qp == 0 {
        BoundaryMask::clear(w, h)
    } else {
        compute_boundary_mask(&Frame::new(w, h, pre.clone()).expect("dims"), cfg.deblock_threshold_at(qp))
    };
    let recon = deblock_raster(&pre, &mask);
    (recon, mask)
}

fn lossless_i_unit(frame: &Frame) -> Vec<u8> {
    let (w, h) = frame.dims();
    let ints = frame.to_u8();
    let blocks = raster_blocks(w, h)
        .map(|(bx, by)| {
            let block: Block = std::array::from_fn(|i| {
                let (x, y) = (bx * TB + i % TB, by * TB + i / TB);
                f64::from(i32::from(ints[y * w + x]) - MID_GREY)
            });
            transform_quant(&block, 0).expect("8-bit residuals fit")
        })
        .collect();
    encode_unit(FrameType::I, 0, &UnitPayload { fields: vec![], blocks })
}

/// Losslessly codes an 8-bit frame as a standalone I unit.
pub fn encode_i_unit(frame: &Frame, cfg: &CodecConfig) -> Result<Vec<u8>> {
    cfg.check_dims(frame.dims())?;
    Ok(lossless_i_unit(&frame.quantized()))
}

fn decode_i_unit(unit: &[u8], w: usize, h: usize, base: usize) -> Result<Frame> {
    let hdr = UnitHeader::read(unit, 0, base)?;
    if hdr.frame_type != FrameType::I || hdr.qp != 0 {
        return Err(Error::CorruptUnit { offset: base, reason: "expected a lossless I unit".into() });
    }
    let shape = PayloadShape { motion_block: 16, width: w, height: h, mv_limit: 0 };
    let payload = decode_payload(&unit[UNIT_HEADER_LEN..], FrameType::I, shape, base + UNIT_HEADER_LEN)?;
    let mut samples = vec![0u8; w * h];
    for ((bx, by), coeffs) in raster_blocks(w, h).zip(&payload.blocks) {
        let px = dequant_itransform(coeffs, 0);
        for i in 0..BLOCK_LEN {
            let v = px[i] as i32 + MID_GREY;
            if !(0..=255).contains(&v) {
                return Err(Error::CorruptUnit { offset: base, reason: "I sample outside 8-bit range".into() });
            }
            samples[(by * TB + i / TB) * w + bx * TB + i % TB] = v as u8;
        }
    }
    Frame::from_u8(w, h, &samples)
}

/// Spatial residual integers for lossless P/B coding against the 8-bit prediction.
fn lossless_residual(pred: &[f64], target: &[u8]) -> Vec<i32> {
    pred.iter().zip(target).map(|(&p, &t)| i32::from(t) - (p * 255.0).round() as i32).collect()
}

fn residual_blocks(pred: &[f64], target: &Frame, qp: u8) -> Result<Vec<Coeffs>> {
    let (w, h) = target.dims();
    let spatial: Vec<f64> = if qp == 0 {
        lossless_residual(pred, &target.to_u8()).into_iter().map(f64::from).collect()
    } else {
        target.data().iter().zip(pred).map(|(t, p)| (t - p) * 255.0).collect()
    };
    raster_blocks(w, h)
        .map(|(bx, by)| {
            let block: Block = std::array::from_fn(|i| spatial[(by * TB + i / TB) * w + bx * TB + i % TB]);
            transform_quant(&block, qp)
        })
        .collect()
}

/// Encoder output with the closed-loop reconstructions (display order, 8-bit).
#[derive(Debug, Clone)]
pub struct EncodedGop {
    pub coded: CodedGop,
    pub recon: Vec<Frame>,
}

/// Encodes a GOP whose I-frame is `injected_reference` (snapped to 8 bits).
///
/// `frames[0]` is the original I-frame and is not coded; the remaining frames
/// are P/B-coded at `qp` against the closed-loop reconstructions. The
/// lossless I unit is kept only when `keep_i_unit` is set.
pub fn encode_gop_with_recon(
    frames: &[Frame],
    injected_reference: &Frame,
    qp: u8,
    keep_i_unit: bool,
    cfg: &CodecConfig,
) -> Result<EncodedGop> {
    cfg.validate()?;
    cfg.check_qp(qp)?;
    let first = frames.first().ok_or_else(|| Error::precondition("empty GOP"))?;
    let dims = first.dims();
    cfg.check_dims(dims)?;
    for f in frames {
        f.check_dims(dims)?;
    }
    injected_reference.check_dims(dims)?;
    let (w, h) = dims;

    let i_frame = injected_reference.quantized();
    let i_unit = keep_i_unit.then(|| lossless_i_unit(&i_frame));

    let mut refs: Vec<Option<Vec<f64>>> = vec![None; frames.len()];
    let mut out: Vec<Option<Frame>> = vec![None; frames.len()];
    refs[0] = Some(i_frame.data().to_vec());
    out[0] = Some(i_frame);

    let mut pb_units = Vec::with_capacity(frames.len().saturating_sub(1));
    for plan in gop_plan(frames.len(), cfg.b_frames) {
        let target = &frames[plan.display];
        let ref_rasters: Vec<&[f64]> =
            plan.refs.iter().map(|&r| refs[r].as_deref().expect("reference decoded earlier")).collect();
        let fields = ref_rasters
            .iter()
            .map(|r| motion_estimate(target, &Frame::new(w, h, r.to_vec())?, cfg))
            .collect::<Result<Vec<_>>>()?;
        let pred = predict(&ref_rasters, &fields, w, h);
        let blocks = residual_blocks(&pred, target, qp)?;
        let residual = blocks_to_raster(&blocks, qp, w, h);
        let (recon, _) = reconstruct(&pred, &residual, qp, w, h, cfg);
        pb_units.push(encode_unit(plan.kind, qp, &UnitPayload { fields, blocks }));
        out[plan.display] = Some(Frame::new(w, h, recon.clone())?.quantized());
        refs[plan.display] = Some(recon);
    }
    Ok(EncodedGop {
        coded: CodedGop { i_unit, pb_units },
        recon: out.into_iter().map(|f| f.expect("every frame coded")).collect(),
    })
}

pub fn encode_gop(
    frames: &[Frame],
    injected_reference: &Frame,
    qp: u8,
    keep_i_unit: bool,
    cfg: &CodecConfig,
) -> Result<CodedGop> {
    encode_gop_with_recon(frames, injected_reference, qp, keep_i_unit, cfg).map(|e| e.coded)
}

/// Decodes a GOP and returns the frozen side information alongside the pictures.
pub fn decode_gop_frozen(
    coded: &CodedGop,
    injected_reference: Option<&Frame>,
    dims: (usize, usize),
    cfg: &CodecConfig,
) -> Result<(Vec<Frame>, FrozenGop)> {
    cfg.check_dims(dims)?;
    let (w, h) = dims;
    let i_frame = match (&coded.i_unit, injected_reference) {
        (Some(unit), None) => decode_i_unit(unit, w, h, 0)?,
        (None, Some(r)) => {
            r.check_dims(dims)?;
            r.quantized()
        }
        (None, None) => return Err(Error::MissingReference),
        (Some(_), Some(_)) => {
            return Err(Error::Structure("both a coded I unit and an injected reference were supplied".into()))
        }
    };

    let n = coded.n_frames();
    let plan = gop_plan(n, cfg.b_frames);
    let mut refs: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut out: Vec<Option<Frame>> = vec![None; n];
    refs[0] = Some(i_frame.data().to_vec());
    out[0] = Some(i_frame);

    let shape = PayloadShape { motion_block: cfg.block_size, width: w, height: h, mv_limit: 2 * cfg.search_range };
    let mut base = coded.i_unit_len();
    let mut units = Vec::with_capacity(plan.len());
    for (unit, plan) in coded.pb_units.iter().zip(plan) {
        let hdr = UnitHeader::read(unit, 0, base)?;
        if hdr.frame_type != plan.kind {
            return Err(Error::CorruptUnit {
                offset: base,
                reason: format!("expected a {:?} unit, found {:?}", plan.kind, hdr.frame_type),
            });
        }
        if hdr.qp > cfg.qp_max {
            return Err(Error::CorruptUnit { offset: base + 1, reason: format!("qp {} above maximum", hdr.qp) });
        }
        let body = unit
            .get(UNIT_HEADER_LEN..UNIT_HEADER_LEN + hdr.payload_len as usize)
            .ok_or(Error::Truncated { offset: base + unit.len() })?;
        let payload = decode_payload(body, hdr.frame_type, shape, base + UNIT_HEADER_LEN)?;
        let ref_rasters: Vec<&[f64]> =
            plan.refs.iter().map(|&r| refs[r].as_deref().expect("reference decoded earlier")).collect();
        let pred = predict(&ref_rasters, &payload.fields, w, h);
        let residual = blocks_to_raster(&payload.blocks, hdr.qp, w, h);
        let (recon, mask) = reconstruct(&pred, &residual, hdr.qp, w, h, cfg);
        out[plan.display] = Some(Frame::new(w, h, recon.clone())?.quantized());
        refs[plan.display] = Some(recon);
        units.push(FrozenUnit { plan, qp: hdr.qp, fields: payload.fields, residual, mask });
        base += unit.len();
    }
    let frames = out.into_iter().map(|f| f.expect("every frame decoded")).collect();
    Ok((frames, FrozenGop { width: w, height: h, units }))
}

pub fn decode_gop(
    coded: &CodedGop,
    injected_reference: Option<&Frame>,
    dims: (usize, usize),
    cfg: &CodecConfig,
) -> Result<Vec<Frame>> {
    decode_gop_frozen(coded, injected_reference, dims, cfg).map(|(f, _)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{psnr, synth_sequence, SynthKind};

    fn cfg() -> CodecConfig {
        CodecConfig::default()
    }

    #[test]
    fn plan_shapes() {
        let p = gop_plan(5, false);
        assert_eq!(p.iter().map(|u| u.display).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        let b = gop_plan(8, true);
        let order: Vec<(usize, FrameType)> = b.iter().map(|u| (u.display, u.kind)).collect();
        use FrameType::*;
        assert_eq!(order, vec![(2, P), (1, B), (4, P), (3, B), (6, P), (5, B), (7, P)]);
        assert_eq!(b[1].refs, vec![0, 2]);
        assert_eq!(b[6].refs, vec![6]);
        assert_eq!(gop_plan(1, true), vec![]);
        assert_eq!(gop_plan(2, true).len(), 1);
    }

    #[test]
    fn b_frames_are_never_referenced() {
        for n in 1..12 {
            let plan = gop_plan(n, true);
            let bs: Vec<usize> = plan.iter().filter(|u| u.kind == FrameType::B).map(|u| u.display).collect();
            for u in &plan {
                assert!(u.refs.iter().all(|r| !bs.contains(r)));
            }
            let mut shown: Vec<usize> = plan.iter().map(|u| u.display).collect();
            shown.sort();
            assert_eq!(shown, (1..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn static_sequence_is_cheap() {
        let seq = synth_sequence(SynthKind::Translate, 64, 64, 1, 1).unwrap();
        let frames = vec![seq.frames[0].clone(); 6];
        let enc = encode_gop_with_recon(&frames, &frames[0], 20, false, &cfg()).unwrap();
        let (_, frozen) = decode_gop_frozen(&enc.coded, Some(&frames[0]), (64, 64), &cfg()).unwrap();
        for u in &frozen.units {
            assert!(u.fields[0].mvs.iter().all(|m| m.dx == 0 && m.dy == 0));
            assert!(u.residual.iter().all(|&r| r == 0.0));
        }
        // 16 zero MVs (32 one-bit codes) + 64 empty blocks = 96 bits.
        assert!(enc.coded.pb_units.iter().all(|u| u.len() == UNIT_HEADER_LEN + 12));
    }

    #[test]
    fn single_frame_gop_has_only_i_unit() {
        let seq = synth_sequence(SynthKind::Noise, 32, 32, 1, 2).unwrap();
        let coded = encode_gop(&seq.frames, &seq.frames[0], 10, true, &cfg()).unwrap();
        assert!(coded.i_unit.is_some());
        assert!(coded.pb_units.is_empty());
        let out = decode_gop(&coded, None, (32, 32), &cfg()).unwrap();
        assert_eq!(out, seq.frames);
    }

    #[test]
    fn closed_loop_is_bit_exact() {
        for b_frames in [false, true] {
            let cfg = CodecConfig { b_frames, ..cfg() };
            for kind in SynthKind::ALL {
                let seq = synth_sequence(kind, 48, 32, 7, 3).unwrap();
                for qp in [0, 7, 22, 40] {
                    let enc = encode_gop_with_recon(&seq.frames, &seq.frames[0], qp, false, &cfg).unwrap();
                    let dec = decode_gop(&enc.coded, Some(&seq.frames[0]), (48, 32), &cfg).unwrap();
                    assert_eq!(dec, enc.recon, "{kind:?} qp {qp} b {b_frames}");
                }
            }
        }
    }

    #[test]
    fn qp0_is_lossless() {
        for b_frames in [false, true] {
            let cfg = CodecConfig { b_frames, ..cfg() };
            for kind in SynthKind::ALL {
                let seq = synth_sequence(kind, 32, 32, 5, 9).unwrap();
                let coded = encode_gop(&seq.frames, &seq.frames[0], 0, true, &cfg).unwrap();
                let dec = decode_gop(&coded, None, (32, 32), &cfg).unwrap();
                for (a, b) in dec.iter().zip(&seq.frames) {
                    assert_eq!(a.to_u8(), b.to_u8(), "{kind:?}");
                }
            }
        }
    }

    #[test]
    fn lossy_quality_falls_with_qp() {
        let seq = synth_sequence(SynthKind::Translate, 64, 64, 4, 5).unwrap();
        let q = |qp| {
            let enc = encode_gop_with_recon(&seq.frames, &seq.frames[0], qp, false, &cfg()).unwrap();
            psnr(&enc.recon[3], &seq.frames[3]).unwrap()
        };
        assert!(q(10) > q(30));
        assert!(q(30) > q(45));
    }

    #[test]
    fn reference_rules() {
        let seq = synth_sequence(SynthKind::Noise, 32, 32, 3, 2).unwrap();
        let with_i = encode_gop(&seq.frames, &seq.frames[0], 10, true, &cfg()).unwrap();
        let without = CodedGop { i_unit: None, ..with_i.clone() };
        assert!(matches!(decode_gop(&without, None, (32, 32), &cfg()), Err(Error::MissingReference)));
        assert!(matches!(decode_gop(&with_i, Some(&seq.frames[0]), (32, 32), &cfg()), Err(Error::Structure(_))));
    }

    #[test]
    fn truncated_unit_reports_offset() {
        let seq = synth_sequence(SynthKind::Noise, 32, 32, 3, 2).unwrap();
        let mut coded = encode_gop(&seq.frames, &seq.frames[0], 10, false, &cfg()).unwrap();
        let first_len = coded.pb_units[0].len();
        let unit = &mut coded.pb_units[1];
        unit.truncate(unit.len() - 5);
        match decode_gop(&coded, Some(&seq.frames[0]), (32, 32), &cfg()).unwrap_err() {
            Error::Truncated { offset } => assert_eq!(offset, first_len + coded.pb_units[1].len()),
            Error::CorruptUnit { offset, .. } => assert!(offset >= first_len),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let seq = synth_sequence(SynthKind::Noise, 32, 32, 2, 2).unwrap();
        assert!(matches!(encode_gop(&seq.frames, &seq.frames[0], 52, false, &cfg()), Err(Error::QpRange { .. })));
        let wrong = Frame::filled(48, 32, 0.0);
        assert!(matches!(encode_gop(&seq.frames, &wrong, 10, false, &cfg()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn bytes_roundtrip() {
        let seq = synth_sequence(SynthKind::CheckerPan, 32, 32, 4, 2).unwrap();
        let coded = encode_gop(&seq.frames, &seq.frames[0], 12, true, &cfg()).unwrap();
        assert_eq!(CodedGop::from_bytes(&coded.to_bytes()).unwrap(), coded);
        assert_eq!(coded.sizes().iter().sum::<usize>(), coded.to_bytes().len());
    }
}
