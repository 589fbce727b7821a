//! Block motion: half-pel motion fields, full-search estimation and the
//! bilinear warp (plus its adjoint, used by the differentiable decoder).

use super::config::CodecConfig;
use crate::error::{Error, Result};
use crate::frame::Frame;

/// Motion vector in half-pel units, giving the displacement of content from
/// the reference to the current frame: a block predicted with `mv` samples
/// the reference at `(x - dx/2, y - dy/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Mv {
    pub dx: i32,
    pub dy: i32,
}

impl Mv {
    pub const ZERO: Mv = Mv { dx: 0, dy: 0 };

    pub fn new(dx: i32, dy: i32) -> Self {
        Mv { dx, dy }
    }

    /// Tie-break key: smallest `|dx| + |dy|`, then smallest `dy`, then `dx`.
    fn tie_key(self) -> (i32, i32, i32) {
        (self.dx.abs() + self.dy.abs(), self.dy, self.dx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionField {
    pub block: usize,
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub mvs: Vec<Mv>,
}

impl MotionField {
    pub fn zeros(width: usize, height: usize, block: usize) -> Self {
        let (blocks_x, blocks_y) = (width / block, height / block);
        MotionField { block, blocks_x, blocks_y, mvs: vec![Mv::ZERO; blocks_x * blocks_y] }
    }

    pub fn uniform(width: usize, height: usize, block: usize, mv: Mv) -> Self {
        let mut f = Self::zeros(width, height, block);
        f.mvs.fill(mv);
        f
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.blocks_x * self.block, self.blocks_y * self.block)
    }

    pub fn get(&self, bx: usize, by: usize) -> Mv {
        self.mvs[by * self.blocks_x + bx]
    }

    pub fn check_against(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims || self.mvs.len() != self.blocks_x * self.blocks_y {
            return Err(Error::Structure(format!("motion field covers {:?}, frame is {dims:?}", self.dims())));
        }
        Ok(())
    }
}

/// Taps along one axis for half-pel coordinate `h` (in half-pels): the two
/// clamped sample indices and the weight of the second one (0 or 0.5).
#[inline]
fn taps(h: i64, len: usize) -> (usize, usize, f64) {
    let base = h.div_euclid(2);
    let frac = h.rem_euclid(2);
    let last = len as i64 - 1;
    let a = base.clamp(0, last) as usize;
    let b = (base + 1).clamp(0, last) as usize;
    (a, b, if frac == 0 { 0.0 } else { 0.5 })
}

/// Predicts one motion block at `(x0, y0)` of size `bw x bh` into `out`.
#[allow(clippy::too_many_arguments)]
fn predict_block(src: &[f64], w: usize, h: usize, x0: usize, y0: usize, bw: usize, bh: usize, mv: Mv, out: &mut [f64]) {
    for y in 0..bh {
        let (ya, yb, wy) = taps(2 * (y0 + y) as i64 - i64::from(mv.dy), h);
        let (ra, rb) = (&src[ya * w..(ya + 1) * w], &src[yb * w..(yb + 1) * w]);
        for x in 0..bw {
            let (xa, xb, wx) = taps(2 * (x0 + x) as i64 - i64::from(mv.dx), w);
            let top = (1.0 - wx) * ra[xa] + wx * ra[xb];
            let bot = (1.0 - wx) * rb[xa] + wx * rb[xb];
            out[y * bw + x] = (1.0 - wy) * top + wy * bot;
        }
    }
}

/// Motion-compensated prediction of a raster.
pub fn warp_raster(src: &[f64], w: usize, h: usize, field: &MotionField) -> Vec<f64> {
    let b = field.block;
    let mut out = vec![0.0; w * h];
    let mut blk = vec![0.0; b * b];
    for by in 0..field.blocks_y {
        for bx in 0..field.blocks_x {
            predict_block(src, w, h, bx * b, by * b, b, b, field.get(bx, by), &mut blk);
            for y in 0..b {
                let row = (by * b + y) * w + bx * b;
                out[row..row + b].copy_from_slice(&blk[y * b..(y + 1) * b]);
            }
        }
    }
    out
}

/// Transpose of [`warp_raster`]: scatters output gradients back onto the source taps.
pub fn warp_adjoint(grad_out: &[f64], w: usize, h: usize, field: &MotionField) -> Vec<f64> {
    let b = field.block;
    let mut grad = vec![0.0; w * h];
    for by in 0..field.blocks_y {
        for bx in 0..field.blocks_x {
            let mv = field.get(bx, by);
            for y in 0..b {
                let py = by * b + y;
                let (ya, yb, wy) = taps(2 * py as i64 - i64::from(mv.dy), h);
                for x in 0..b {
                    let px = bx * b + x;
                    let g = grad_out[py * w + px];
                    if g == 0.0 {
                        continue;
                    }
                    let (xa, xb, wx) = taps(2 * px as i64 - i64::from(mv.dx), w);
                    grad[ya * w + xa] += g * (1.0 - wy) * (1.0 - wx);
                    grad[ya * w + xb] += g * (1.0 - wy) * wx;
                    grad[yb * w + xa] += g * wy * (1.0 - wx);
                    grad[yb * w + xb] += g * wy * wx;
                }
            }
        }
    }
    grad
}

pub fn warp(reference: &Frame, field: &MotionField) -> Result<Frame> {
    field.check_against(reference.dims())?;
    let (w, h) = reference.dims();
    Frame::new(w, h, warp_raster(reference.data(), w, h, field))
}

fn block_sad(target: &[f64], w: usize, x0: usize, y0: usize, b: usize, pred: &[f64], bound: f64) -> f64 {
    let mut sad = 0.0;
    for y in 0..b {
        let row = &target[(y0 + y) * w + x0..(y0 + y) * w + x0 + b];
        sad += row.iter().zip(&pred[y * b..(y + 1) * b]).map(|(t, p)| (t - p).abs()).sum::<f64>();
        if sad > bound {
            break;
        }
    }
    sad
}

/// Full-search block matching at integer pel followed by a half-pel refinement
/// over the 8 neighbours of the integer winner.
pub fn motion_estimate(target: &Frame, reference: &Frame, cfg: &CodecConfig) -> Result<MotionField> {
    target.check_dims(reference.dims())?;
    cfg.check_dims(target.dims())?;
    let (w, h) = target.dims();
    let b = cfg.block_size;
    let sr = cfg.search_range;
    let limit = 2 * sr;
    let mut field = MotionField::zeros(w, h, b);
    let mut pred = vec![0.0; b * b];
    let (t, r) = (target.data(), reference.data());

    for by in 0..field.blocks_y {
        for bx in 0..field.blocks_x {
            let (x0, y0) = (bx * b, by * b);
            let mut best = (f64::INFINITY, Mv::ZERO);
            let consider = |mv: Mv, best: &mut (f64, Mv), pred: &mut [f64]| {
                predict_block(r, w, h, x0, y0, b, b, mv, pred);
                let sad = block_sad(t, w, x0, y0, b, pred, best.0);
                if sad < best.0 || (sad == best.0 && mv.tie_key() < best.1.tie_key()) {
                    *best = (sad, mv);
                }
            };
            for dy in -sr..=sr {
                for dx in -sr..=sr {
                    consider(Mv::new(2 * dx, 2 * dy), &mut best, &mut pred);
                }
            }
            let centre = best.1;
            for ddy in -1..=1 {
                for ddx in -1..=1 {
                    if ddx == 0 && ddy == 0 {
                        continue;
                    }
                    let mv = Mv::new(centre.dx + ddx, centre.dy + ddy);
                    if mv.dx.abs() <= limit && mv.dy.abs() <= limit {
                        consider(mv, &mut best, &mut pred);
                    }
                }
            }
            field.mvs[by * field.blocks_x + bx] = best.1;
        }
    }
    Ok(field)
}
