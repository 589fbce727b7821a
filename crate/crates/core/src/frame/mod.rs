//! Pixel data model: single-plane luma frames and sequences.
//!
//! A [`Frame`] keeps its samples in real-valued form in `[0, 1]`. The 8-bit
//! form is derived on demand as `round(real * 255)`, so frames built from
//! 8-bit data satisfy `int == round(real * 255)` exactly.

mod io;
mod metrics;
mod synth;

pub use io::{read_sequence, write_sequence, SequenceFormat, RAWV_HEADER_LEN, RAWV_MAGIC};
pub use metrics::{gop_psnr, mse, psnr, psnr_from_mse, QualityReport};
pub use synth::{synth_sequence, SynthKind};

use crate::error::{Error, Result};

/// Converts a real sample to its 8-bit form.
#[inline]
pub fn quantize_sample(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::precondition(format!("raster of {} samples for a {width}x{height} frame", data.len())));
        }
        Ok(Frame { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Frame { width, height, data: vec![value; width * height] }
    }

    pub fn from_u8(width: usize, height: usize, samples: &[u8]) -> Result<Self> {
        if samples.len() != width * height {
            return Err(Error::precondition(format!(
                "raster of {} samples for a {width}x{height} frame",
                samples.len()
            )));
        }
        let data = samples.iter().map(|&s| f64::from(s) / 255.0).collect();
        Ok(Frame { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Frame { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// 8-bit form of the raster.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize_sample(v)).collect()
    }

    /// The frame snapped to the 8-bit grid (real form re-derived from the integers).
    pub fn quantized(&self) -> Frame {
        let data = self.data.iter().map(|&v| f64::from(quantize_sample(v)) / 255.0).collect();
        Frame { width: self.width, height: self.height, data }
    }

    /// Pads right and bottom edges by replication up to a multiple of `block`.
    pub fn pad_to_multiple(&self, block: usize) -> Frame {
        let pw = self.width.div_ceil(block) * block;
        let ph = self.height.div_ceil(block) * block;
        if pw == self.width && ph == self.height {
            return self.clone();
        }
        Frame::from_fn(pw, ph, |x, y| self.at(x.min(self.width - 1), y.min(self.height - 1)))
    }

    pub fn crop(&self, width: usize, height: usize) -> Frame {
        assert!(width <= self.width && height <= self.height, "crop larger than frame");
        Frame::from_fn(width, height, |x, y| self.at(x, y))
    }

    pub(crate) fn check_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::Dimension { expected: dims, actual: self.dims() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    pub frames: Vec<Frame>,
    pub fps: u32,
    pub name: String,
}

impl VideoSequence {
    pub fn new(frames: Vec<Frame>, fps: u32, name: impl Into<String>) -> Result<Self> {
        if fps == 0 {
            return Err(Error::precondition("fps must be positive"));
        }
        if let Some(first) = frames.first() {
            let dims = first.dims();
            for f in &frames[1..] {
                f.check_dims(dims)?;
            }
        }
        Ok(VideoSequence { frames, fps, name: name.into() })
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(Frame::dims)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
