//! Coded unit layout.
//!
//! Every unit starts with an 8-byte little-endian header: `u8 frame_type`,
//! `u8 qp`, `u16 reserved` (zero), `u32 payload length`. The payload holds the
//! motion fields (one per reference, differential signed Exp-Golomb in block
//! raster order) followed by the residual blocks: per 8x8 block in raster
//! order, `ue(pairs)` then `(ue(run), se(level))` pairs over the zigzag scan.
//! Payloads are zero-padded to a byte boundary.

use super::bits::{BitReader, BitWriter};
use super::motion::{MotionField, Mv};
use super::transform::{Coeffs, BLOCK_LEN};
use crate::error::{Error, Result};

pub const UNIT_HEADER_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    I = 0,
    P = 1,
    B = 2,
}

impl FrameType {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(FrameType::I),
            1 => Some(FrameType::P),
            2 => Some(FrameType::B),
            _ => None,
        }
    }

    pub fn ref_count(self) -> usize {
        match self {
            FrameType::I => 0,
            FrameType::P => 1,
            FrameType::B => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitHeader {
    pub frame_type: FrameType,
    pub qp: u8,
    pub payload_len: u32,
}

impl UnitHeader {
    pub fn write(&self, out: &mut Vec<u8>) {
        out.push(self.frame_type as u8);
        out.push(self.qp);
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&self.payload_len.to_le_bytes());
    }

    /// Parses a header at `offset` within `bytes`; offsets in errors are
    /// shifted by `base`.
    pub fn read(bytes: &[u8], offset: usize, base: usize) -> Result<Self> {
        let hdr = bytes.get(offset..offset + UNIT_HEADER_LEN).ok_or(Error::Truncated { offset: base + offset })?;
        let frame_type = FrameType::from_u8(hdr[0]).ok_or_else(|| Error::CorruptUnit {
            offset: base + offset,
            reason: format!("unknown frame type {}", hdr[0]),
        })?;
        let reserved = u16::from_le_bytes([hdr[2], hdr[3]]);
        if reserved != 0 {
            return Err(Error::CorruptUnit { offset: base + offset + 2, reason: "reserved field is not zero".into() });
        }
        let payload_len = u32::from_le_bytes(hdr[4..8].try_into().unwrap());
        Ok(UnitHeader { frame_type, qp: hdr[1], payload_len })
    }
}

/// In-memory content of one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPayload {
    pub fields: Vec<MotionField>,
    pub blocks: Vec<Coeffs>,
}

pub fn encode_unit(frame_type: FrameType, qp: u8, payload: &UnitPayload) -> Vec<u8> {
    let mut bw = BitWriter::new();
    for field in &payload.fields {
        let mut prev = Mv::ZERO;
        for &mv in &field.mvs {
            bw.put_se(mv.dx - prev.dx);
            bw.put_se(mv.dy - prev.dy);
            prev = mv;
        }
    }
    for block in &payload.blocks {
        let pairs = run_levels(block);
        bw.put_ue(pairs.len() as u32);
        for (run, level) in pairs {
            bw.put_ue(run);
            bw.put_se(i32::from(level));
        }
    }
    let body = bw.finish();
    let mut out = Vec::with_capacity(UNIT_HEADER_LEN + body.len());
    UnitHeader { frame_type, qp, payload_len: body.len() as u32 }.write(&mut out);
    out.extend(body);
    out
}

fn run_levels(block: &Coeffs) -> Vec<(u32, i16)> {
    let mut pairs = Vec::new();
    let mut run = 0u32;
    for &c in block {
        if c == 0 {
            run += 1;
        } else {
            pairs.push((run, c));
            run = 0;
        }
    }
    pairs
}

/// Shape information the decoder needs to parse a payload.
#[derive(Debug, Clone, Copy)]
pub struct PayloadShape {
    pub motion_block: usize,
    pub width: usize,
    pub height: usize,
    pub mv_limit: i32,
}

pub fn decode_payload(payload: &[u8], frame_type: FrameType, shape: PayloadShape, base: usize) -> Result<UnitPayload> {
    let mut br = BitReader::new(payload, base);
    let mut fields = Vec::with_capacity(frame_type.ref_count());
    for _ in 0..frame_type.ref_count() {
        let mut field = MotionField::zeros(shape.width, shape.height, shape.motion_block);
        let mut prev = Mv::ZERO;
        for mv in field.mvs.iter_mut() {
            let dx = prev.dx.checked_add(br.read_se()?);
            let dy = prev.dy.checked_add(br.read_se()?);
            let (dx, dy) = match (dx, dy) {
                (Some(dx), Some(dy)) if dx.abs() <= shape.mv_limit && dy.abs() <= shape.mv_limit => (dx, dy),
                _ => {
                    return Err(Error::CorruptUnit {
                        offset: br.byte_offset(),
                        reason: "motion vector outside the search range".into(),
                    })
                }
            };
            *mv = Mv::new(dx, dy);
            prev = *mv;
        }
        fields.push(field);
    }
    let n_blocks = (shape.width / 8) * (shape.height / 8);
    let mut blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let mut block = [0i16; BLOCK_LEN];
        let pairs = br.read_ue()? as usize;
        if pairs > BLOCK_LEN {
            return Err(Error::CorruptUnit { offset: br.byte_offset(), reason: "too many coefficients".into() });
        }
        let mut pos = 0usize;
        for _ in 0..pairs {
            pos += br.read_ue()? as usize;
            let level = br.read_se()?;
            if pos >= BLOCK_LEN || level == 0 || i16::try_from(level).is_err() {
                return Err(Error::CorruptUnit { offset: br.byte_offset(), reason: "invalid run/level pair".into() });
            }
            block[pos] = level as i16;
            pos += 1;
        }
        blocks.push(block);
    }
    Ok(UnitPayload { fields, blocks })
}

/// Splits a concatenation of units into `(offset, header, unit bytes)`.
pub fn split_units(bytes: &[u8], base: usize) -> Result<Vec<(usize, UnitHeader, &[u8])>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let hdr = UnitHeader::read(bytes, pos, base)?;
        let end = pos + UNIT_HEADER_LEN + hdr.payload_len as usize;
        if end > bytes.len() {
            return Err(Error::Truncated { offset: base + bytes.len() });
        }
        out.push((pos, hdr, &bytes[pos..end]));
        pos = end;
    }
    Ok(out)
}
