//! Client-side stitching: the generated keyframe is re-encoded losslessly and
//! put in front of the legacy units, giving a plain codec stream.

use crate::codec::{decode_gop, encode_i_unit, CodecConfig, CodedGop};
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StitchedStream {
    pub bytes: Vec<u8>,
    pub i_unit_len: usize,
}

impl StitchedStream {
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// Decodes with no injected reference, as any decoder of the block codec would.
    pub fn decode(&self, dims: (usize, usize), cfg: &CodecConfig) -> Result<Vec<Frame>> {
        let coded = CodedGop::from_bytes(&self.bytes)?;
        if coded.i_unit.is_none() {
            return Err(Error::MissingReference);
        }
        decode_gop(&coded, None, dims, cfg)
    }
}

/// `i_frame` should already sit on the 8-bit grid; it is snapped regardless.
pub fn stitch(i_frame: &Frame, legacy: &[u8], cfg: &CodecConfig) -> Result<StitchedStream> {
    let i_unit = encode_i_unit(i_frame, cfg)?;
    let i_unit_len = i_unit.len();
    let mut bytes = i_unit;
    bytes.extend_from_slice(legacy);
    Ok(StitchedStream { bytes, i_unit_len })
}
