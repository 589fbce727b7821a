//! Gated [1, 2, 1] / 4 smoothing across 8x8 block boundaries.
//!
//! Vertical boundaries are filtered first (horizontal taps), then horizontal
//! boundaries on that result. The gating mask is computed once from the
//! unfiltered frame, so for a fixed mask the filter is a linear map.

use super::config::TRANSFORM_BLOCK as B;
use crate::frame::Frame;

/// One flag per sample pair straddling an interior 8x8 boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMask {
    pub width: usize,
    pub height: usize,
    /// Indexed `[y * cols + k]` for the boundary between columns `8(k+1) - 1` and `8(k+1)`.
    pub vertical: Vec<bool>,
    /// Indexed `[k * width + x]` for the boundary between rows `8(k+1) - 1` and `8(k+1)`.
    pub horizontal: Vec<bool>,
}

impl BoundaryMask {
    fn vcols(width: usize) -> usize {
        (width / B).saturating_sub(1)
    }

    fn hrows(height: usize) -> usize {
        (height / B).saturating_sub(1)
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        BoundaryMask {
            width,
            height,
            vertical: vec![value; height * Self::vcols(width)],
            horizontal: vec![value; Self::hrows(height) * width],
        }
    }

    pub fn clear(width: usize, height: usize) -> Self {
        Self::filled(width, height, false)
    }

    pub fn count_set(&self) -> usize {
        self.vertical.iter().chain(&self.horizontal).filter(|&&f| f).count()
    }
}

pub fn compute_boundary_mask(frame: &Frame, threshold: f64) -> BoundaryMask {
    let (w, h) = frame.dims();
    let cols = BoundaryMask::vcols(w);
    let rows = BoundaryMask::hrows(h);
    let mut mask = BoundaryMask::clear(w, h);
    for y in 0..h {
        for k in 0..cols {
            let x = (k + 1) * B;
            mask.vertical[y * cols + k] = (frame.at(x - 1, y) - frame.at(x, y)).abs() < threshold;
        }
    }
    for k in 0..rows {
        let y = (k + 1) * B;
        for x in 0..w {
            mask.horizontal[k * w + x] = (frame.at(x, y - 1) - frame.at(x, y)).abs() < threshold;
        }
    }
    mask
}

/// Applies the filter to a raster. `src` must be `mask.width x mask.height`.
pub fn deblock_raster(src: &[f64], mask: &BoundaryMask) -> Vec<f64> {
    let (w, h) = (mask.width, mask.height);
    let cols = BoundaryMask::vcols(w);
    let rows = BoundaryMask::hrows(h);
    let mut mid = src.to_vec();
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for k in 0..cols {
            if mask.vertical[y * cols + k] {
                let x = (k + 1) * B;
                mid[y * w + x - 1] = (row[x - 2] + 2.0 * row[x - 1] + row[x]) / 4.0;
                mid[y * w + x] = (row[x - 1] + 2.0 * row[x] + row[x + 1]) / 4.0;
            }
        }
    }
    let mut out = mid.clone();
    for k in 0..rows {
        let y = (k + 1) * B;
        for x in 0..w {
            if mask.horizontal[k * w + x] {
                let at = |yy: usize| mid[yy * w + x];
                out[(y - 1) * w + x] = (at(y - 2) + 2.0 * at(y - 1) + at(y)) / 4.0;
                out[y * w + x] = (at(y - 1) + 2.0 * at(y) + at(y + 1)) / 4.0;
            }
        }
    }
    out
}

/// Transpose of [`deblock_raster`] for the same mask.
pub fn deblock_adjoint(grad_out: &[f64], mask: &BoundaryMask) -> Vec<f64> {
    let (w, h) = (mask.width, mask.height);
    let cols = BoundaryMask::vcols(w);
    let rows = BoundaryMask::hrows(h);

    // Horizontal-boundary pass, reversed.
    let mut g_mid = grad_out.to_vec();
    for k in 0..rows {
        let y = (k + 1) * B;
        for x in 0..w {
            if mask.horizontal[k * w + x] {
                g_mid[(y - 1) * w + x] = 0.0;
                g_mid[y * w + x] = 0.0;
            }
        }
    }
    for k in 0..rows {
        let y = (k + 1) * B;
        for x in 0..w {
            if mask.horizontal[k * w + x] {
                let gp = grad_out[(y - 1) * w + x] / 4.0;
                let gq = grad_out[y * w + x] / 4.0;
                g_mid[(y - 2) * w + x] += gp;
                g_mid[(y - 1) * w + x] += 2.0 * gp + gq;
                g_mid[y * w + x] += gp + 2.0 * gq;
                g_mid[(y + 1) * w + x] += gq;
            }
        }
    }

    // Vertical-boundary pass, reversed.
    let mut g = g_mid.clone();
    for y in 0..h {
        for k in 0..cols {
            if mask.vertical[y * cols + k] {
                let x = (k + 1) * B;
                g[y * w + x - 1] = 0.0;
                g[y * w + x] = 0.0;
            }
        }
    }
    for y in 0..h {
        for k in 0..cols {
            if mask.vertical[y * cols + k] {
                let x = (k + 1) * B;
                let gp = g_mid[y * w + x - 1] / 4.0;
                let gq = g_mid[y * w + x] / 4.0;
                g[y * w + x - 2] += gp;
                g[y * w + x - 1] += 2.0 * gp + gq;
                g[y * w + x] += gp + 2.0 * gq;
                g[y * w + x + 1] += gq;
            }
        }
    }
    g
}

pub fn deblock(frame: &Frame, mask: &BoundaryMask) -> Frame {
    let (w, h) = frame.dims();
    assert_eq!((mask.width, mask.height), (w, h), "mask does not cover the frame");
    Frame::new(w, h, deblock_raster(frame.data(), mask)).expect("same dims")
}
