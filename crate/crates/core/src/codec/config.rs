use crate::error::{Error, Result};

/// Size of the transform block; fixed by the residual coder.
pub const TRANSFORM_BLOCK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    /// Motion block edge in pixels.
    pub block_size: usize,
    /// Integer-pel search radius.
    pub search_range: i32,
    pub qp_max: u8,
    pub gop_length: usize,
    pub b_frames: bool,
    /// Largest cross-boundary step that is smoothed, reached at coarse quantizers.
    pub deblock_threshold: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            block_size: 16,
            search_range: 8,
            qp_max: 51,
            gop_length: 8,
            b_frames: false,
            deblock_threshold: 0.08,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 || !self.block_size.is_multiple_of(TRANSFORM_BLOCK) {
            return Err(Error::precondition(format!(
                "motion block size {} must be a positive multiple of {TRANSFORM_BLOCK}",
                self.block_size
            )));
        }
        if self.search_range < 0 || self.search_range > 64 {
            return Err(Error::precondition(format!("search range {} out of [0, 64]", self.search_range)));
        }
        if self.gop_length == 0 {
            return Err(Error::precondition("gop length must be at least 1"));
        }
        Ok(())
    }

    /// Gate threshold for a unit: one quantizer step in sample units, capped at `deblock_threshold`.
    pub fn deblock_threshold_at(&self, qp: u8) -> f64 {
        (super::transform::qstep(qp) / 255.0).min(self.deblock_threshold)
    }

    pub fn check_qp(&self, qp: u8) -> Result<()> {
        if qp > self.qp_max {
            return Err(Error::QpRange { qp, max: self.qp_max });
        }
        Ok(())
    }

    /// Frame dimensions must tile exactly with motion blocks.
    pub fn check_dims(&self, (w, h): (usize, usize)) -> Result<()> {
        if w == 0 || h == 0 || w % self.block_size != 0 || h % self.block_size != 0 {
            return Err(Error::precondition(format!(
                "frame {w}x{h} is not padded to the {}-pixel block grid",
                self.block_size
            )));
        }
        Ok(())
    }
}
