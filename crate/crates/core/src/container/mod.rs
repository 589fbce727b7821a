//! The HYBP container: a neural track of per-GOP latents interleaved with a
//! legacy track of P/B units.
//!
//! Layout, little-endian:
//!
//! ```text
//! "HYBP" | u16 version | u16 width | u16 height | u32 fps | u32 gop count
//! u16 config length | config block
//! per GOP: u32 neural length | neural | u32 legacy length | legacy | u32 crc32(neural ++ legacy)
//! ```
//!
//! The config block carries everything a decoder needs to rebuild the codec
//! and generator: frame count, GOP length, motion block size, search range,
//! qp ceiling, B-frame flag, deblocking threshold (f64 bits), generator seed,
//! latent dimension, hidden width, two-stage flag and track layout.

mod pipeline;
mod stitch;

pub use pipeline::{decode_stream, run_pipeline, DecodeMode, DecodeTiming, GopTiming, PipelineConfig};
pub use stitch::{stitch, StitchedStream};

use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::genprior::GeneratorSpec;

pub const MAGIC: &[u8; 4] = b"HYBP";
pub const VERSION: u16 = 1;
/// Fixed part of the file header, before the config block.
pub const FIXED_HEADER_LEN: usize = 18;
pub const CONFIG_BLOCK_LEN: usize = 37;

/// What the two tracks carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackLayout {
    /// Latent keyframe plus P/B units predicted from it.
    Hybrid,
    /// Latent keyframe only; every frame of the GOP shows the generated keyframe.
    PromptOnly,
    /// No latent; the legacy track starts with a lossless I unit.
    Traditional,
}

impl TrackLayout {
    fn to_u8(self) -> u8 {
        match self {
            TrackLayout::Hybrid => 0,
            TrackLayout::PromptOnly => 1,
            TrackLayout::Traditional => 2,
        }
    }

    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(TrackLayout::Hybrid),
            1 => Ok(TrackLayout::PromptOnly),
            2 => Ok(TrackLayout::Traditional),
            other => Err(Error::format(format!("unknown track layout {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    /// Picture size before padding to the motion block grid.
    pub width: usize,
    pub height: usize,
    pub fps: u32,
    pub frame_count: usize,
    pub codec: CodecConfig,
    /// Generator seed, latent dimension, hidden width and two-stage flag;
    /// its picture size is always the padded size.
    pub generator: GeneratorSpec,
    pub layout: TrackLayout,
}

impl StreamHeader {
    pub fn padded_dims(&self) -> (usize, usize) {
        let b = self.codec.block_size;
        (self.width.div_ceil(b) * b, self.height.div_ceil(b) * b)
    }

    pub fn gop_count(&self) -> usize {
        self.frame_count.div_ceil(self.codec.gop_length)
    }

    /// Frames in GOP `g`; the last one may be short.
    pub fn gop_frames(&self, g: usize) -> usize {
        let start = g * self.codec.gop_length;
        self.codec.gop_length.min(self.frame_count.saturating_sub(start))
    }

    fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        if self.padded_dims() != (self.generator.width, self.generator.height) {
            return Err(Error::format("generator size differs from the padded picture size"));
        }
        if self.fps == 0 {
            return Err(Error::format("fps must be positive"));
        }
        if self.layout != TrackLayout::Traditional {
            self.generator.validate().map_err(|e| Error::format(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GopRecord {
    /// Serialized latent; empty for the traditional layout.
    pub neural: Vec<u8>,
    /// Concatenated coded units.
    pub legacy: Vec<u8>,
}

impl GopRecord {
    pub fn checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        h.update(&self.neural);
        h.update(&self.legacy);
        h.finalize()
    }

    /// Bytes this record occupies in the stream.
    pub fn stream_len(&self) -> usize {
        12 + self.neural.len() + self.legacy.len()
    }
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &str) -> Result<T> {
    T::try_from(v).map_err(|_| Error::precondition(format!("{what} {v} does not fit the container field")))
}

pub fn header_len() -> usize {
    FIXED_HEADER_LEN + 2 + CONFIG_BLOCK_LEN
}

pub fn mux(header: &StreamHeader, records: &[GopRecord]) -> Result<Vec<u8>> {
    header.validate()?;
    if records.len() != header.gop_count() {
        return Err(Error::precondition(format!(
            "{} GOP records for {} frames in GOPs of {}",
            records.len(),
            header.frame_count,
            header.codec.gop_length
        )));
    }
    let c = &header.codec;
    let g = &header.generator;
    let mut out = Vec::with_capacity(header_len() + records.iter().map(GopRecord::stream_len).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(header.width, "width")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(header.height, "height")?.to_le_bytes());
    out.extend_from_slice(&header.fps.to_le_bytes());
    out.extend_from_slice(&narrow::<u32>(records.len(), "gop count")?.to_le_bytes());

    out.extend_from_slice(&(CONFIG_BLOCK_LEN as u16).to_le_bytes());
    out.extend_from_slice(&narrow::<u32>(header.frame_count, "frame count")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(c.gop_length, "gop length")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(c.block_size, "block size")?.to_le_bytes());
    out.push(narrow::<u8>(c.search_range as usize, "search range")?);
    out.push(c.qp_max);
    out.push(u8::from(c.b_frames));
    out.extend_from_slice(&c.deblock_threshold.to_bits().to_le_bytes());
    out.extend_from_slice(&g.seed.to_le_bytes());
    out.extend_from_slice(&narrow::<u32>(g.latent_dim, "latent dimension")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u32>(g.hidden, "hidden width")?.to_le_bytes());
    out.push(u8::from(g.two_stage));
    out.push(header.layout.to_u8());

    for r in records {
        out.extend_from_slice(&narrow::<u32>(r.neural.len(), "neural length")?.to_le_bytes());
        out.extend_from_slice(&r.neural);
        out.extend_from_slice(&narrow::<u32>(r.legacy.len(), "legacy length")?.to_le_bytes());
        out.extend_from_slice(&r.legacy);
        out.extend_from_slice(&r.checksum().to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(Error::Truncated { offset: self.bytes.len() })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }
}

fn flag(v: u8, what: &str) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::format(format!("{what} flag is {other}"))),
    }
}

pub fn demux(bytes: &[u8]) -> Result<(StreamHeader, Vec<GopRecord>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.array()?;
    if &magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let width = usize::from(cur.u16()?);
    let height = usize::from(cur.u16()?);
    let fps = cur.u32()?;
    let gop_count = cur.u32()? as usize;

    let config_len = usize::from(cur.u16()?);
    if config_len != CONFIG_BLOCK_LEN {
        return Err(Error::format(format!("config block of {config_len} bytes, expected {CONFIG_BLOCK_LEN}")));
    }
    let frame_count = cur.u32()? as usize;
    let gop_length = usize::from(cur.u16()?);
    let block_size = usize::from(cur.u16()?);
    let search_range = i32::from(cur.u8()?);
    let qp_max = cur.u8()?;
    let b_frames = flag(cur.u8()?, "B-frame")?;
    let deblock_threshold = f64::from_bits(cur.u64()?);
    let seed = cur.u64()?;
    let latent_dim = cur.u32()? as usize;
    let hidden = cur.u32()? as usize;
    let two_stage = flag(cur.u8()?, "two-stage")?;
    let layout = TrackLayout::from_u8(cur.u8()?)?;

    let codec = CodecConfig { block_size, search_range, qp_max, gop_length, b_frames, deblock_threshold };
    codec.validate().map_err(|e| Error::format(e.to_string()))?;
    let mut header = StreamHeader {
        width,
        height,
        fps,
        frame_count,
        codec,
        generator: GeneratorSpec { seed, latent_dim, hidden, width: 0, height: 0, two_stage },
        layout,
    };
    (header.generator.width, header.generator.height) = header.padded_dims();
    header.validate()?;
    if gop_count != header.gop_count() {
        return Err(Error::format(format!("{gop_count} GOPs declared for {frame_count} frames")));
    }

    let mut records = Vec::with_capacity(gop_count.min(bytes.len() / 12));
    for gop in 0..gop_count {
        let n = cur.u32()? as usize;
        let neural = cur.take(n)?.to_vec();
        let n = cur.u32()? as usize;
        let legacy = cur.take(n)?.to_vec();
        let stored = cur.u32()?;
        let record = GopRecord { neural, legacy };
        if record.checksum() != stored {
            return Err(Error::Checksum { gop });
        }
        records.push(record);
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(format!("{} trailing bytes after the last GOP", bytes.len() - cur.pos)));
    }
    Ok((header, records))
}
