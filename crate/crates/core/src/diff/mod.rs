//! Reverse-mode differentiation over the decode chain.
//!
//! A [`Tape`] records raster operations in execution order. Frozen side
//! information (motion fields, residuals, boundary masks, loss targets) is
//! borrowed, never copied, so one tape per refinement step is cheap.
//! [`Tape::backward`] walks the nodes once in reverse.

mod upsample;

pub use upsample::{upsample2x_adjoint, upsample2x_raster};

use crate::codec::{
    deblock_adjoint, deblock_raster, warp_adjoint, warp_raster, BoundaryMask, FrameType, FrozenGop, MotionField,
};
use crate::error::{Error, Result};
use crate::frame::Frame;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffTensor {
    id: usize,
    width: usize,
    height: usize,
}

impl DiffTensor {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

type Vjp<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>;

enum Op<'a> {
    Leaf,
    Warp { x: usize, field: &'a MotionField },
    AddResidual { x: usize },
    Average { a: usize, b: usize },
    Clip { x: usize, lo: f64, hi: f64 },
    RoundSte { x: usize },
    Deblock { x: usize, mask: &'a BoundaryMask },
    Upsample { x: usize },
    Mse { x: usize, target: &'a [f64], weight: f64 },
    Dot { x: usize, weights: &'a [f64] },
    Sum { xs: Vec<usize> },
    Custom { x: usize, vjp: Vjp<'a> },
}

struct Node<'a> {
    op: Op<'a>,
    value: Vec<f64>,
    width: usize,
    height: usize,
}

/// Gradients of a scalar with respect to every recorded tensor that needs one.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// `None` when the tensor does not influence the loss or does not require gradients.
    pub fn get(&self, t: DiffTensor) -> Option<&[f64]> {
        self.grads.get(t.id).and_then(|g| g.as_deref())
    }

    /// Like [`Gradients::get`], with zeros where no gradient reached the tensor.
    pub fn dense(&self, t: DiffTensor) -> Vec<f64> {
        self.get(t).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec)
    }
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    needs_grad: Vec<bool>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<'a>, value: Vec<f64>, width: usize, height: usize, needs_grad: bool) -> DiffTensor {
        debug_assert_eq!(value.len(), width * height);
        let id = self.nodes.len();
        self.nodes.push(Node { op, value, width, height });
        self.needs_grad.push(needs_grad);
        DiffTensor { id, width, height }
    }

    fn check_same(a: DiffTensor, b: DiffTensor) -> Result<()> {
        if a.dims() != b.dims() {
            return Err(Error::Dimension { expected: a.dims(), actual: b.dims() });
        }
        Ok(())
    }

    pub fn leaf(&mut self, values: Vec<f64>, width: usize, height: usize, requires_grad: bool) -> Result<DiffTensor> {
        if values.len() != width * height {
            return Err(Error::precondition(format!("{} values for a {width}x{height} tensor", values.len())));
        }
        Ok(self.push(Op::Leaf, values, width, height, requires_grad))
    }

    pub fn leaf_frame(&mut self, frame: &Frame, requires_grad: bool) -> DiffTensor {
        let (w, h) = frame.dims();
        self.push(Op::Leaf, frame.data().to_vec(), w, h, requires_grad)
    }

    pub fn value(&self, t: DiffTensor) -> &[f64] {
        &self.nodes[t.id].value
    }

    pub fn to_frame(&self, t: DiffTensor) -> Frame {
        Frame::new(t.width, t.height, self.value(t).to_vec()).expect("tensor dims")
    }

    /// Scalar value of a 1x1 tensor.
    pub fn scalar(&self, t: DiffTensor) -> f64 {
        self.value(t)[0]
    }

    pub fn d_warp(&mut self, x: DiffTensor, field: &'a MotionField) -> Result<DiffTensor> {
        field.check_against(x.dims())?;
        let out = warp_raster(self.value(x), x.width, x.height, field);
        Ok(self.push(Op::Warp { x: x.id, field }, out, x.width, x.height, self.needs_grad[x.id]))
    }

    pub fn d_add_residual(&mut self, x: DiffTensor, residual: &'a [f64]) -> Result<DiffTensor> {
        if residual.len() != x.len() {
            return Err(Error::precondition(format!("residual of {} samples for {} samples", residual.len(), x.len())));
        }
        let out = self.value(x).iter().zip(residual).map(|(a, r)| a + r).collect();
        Ok(self.push(Op::AddResidual { x: x.id }, out, x.width, x.height, self.needs_grad[x.id]))
    }

    /// Elementwise `(a + b) / 2`.
    pub fn d_average(&mut self, a: DiffTensor, b: DiffTensor) -> Result<DiffTensor> {
        Self::check_same(a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| (x + y) * 0.5).collect();
        let ng = self.needs_grad[a.id] || self.needs_grad[b.id];
        Ok(self.push(Op::Average { a: a.id, b: b.id }, out, a.width, a.height, ng))
    }

    /// Clamp with an exact subgradient: zero where the bound is active.
    pub fn d_clip(&mut self, x: DiffTensor, lo: f64, hi: f64) -> DiffTensor {
        let out = self.value(x).iter().map(|v| v.clamp(lo, hi)).collect();
        self.push(Op::Clip { x: x.id, lo, hi }, out, x.width, x.height, self.needs_grad[x.id])
    }

    /// Rounds to the 8-bit grid forward; identity backward.
    pub fn d_round_ste(&mut self, x: DiffTensor) -> DiffTensor {
        let out = self.value(x).iter().map(|v| (v * 255.0).round() / 255.0).collect();
        self.push(Op::RoundSte { x: x.id }, out, x.width, x.height, self.needs_grad[x.id])
    }

    pub fn d_deblock(&mut self, x: DiffTensor, mask: &'a BoundaryMask) -> Result<DiffTensor> {
        if (mask.width, mask.height) != x.dims() {
            return Err(Error::Dimension { expected: x.dims(), actual: (mask.width, mask.height) });
        }
        let out = deblock_raster(self.value(x), mask);
        Ok(self.push(Op::Deblock { x: x.id, mask }, out, x.width, x.height, self.needs_grad[x.id]))
    }

    /// Align-corners bilinear 2x upsampling, see [`upsample2x_raster`].
    pub fn upsample2x(&mut self, x: DiffTensor) -> DiffTensor {
        let out = upsample2x_raster(self.value(x), x.width, x.height);
        self.push(Op::Upsample { x: x.id }, out, 2 * x.width, 2 * x.height, self.needs_grad[x.id])
    }

    /// `weight * mean((x - target)^2)` as a 1x1 tensor.
    pub fn mse(&mut self, x: DiffTensor, target: &'a [f64], weight: f64) -> Result<DiffTensor> {
        if target.len() != x.len() {
            return Err(Error::precondition(format!("target of {} samples for {} samples", target.len(), x.len())));
        }
        let n = x.len().max(1) as f64;
        let sse: f64 = self.value(x).iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
        let ng = self.needs_grad[x.id] && weight != 0.0;
        Ok(self.push(Op::Mse { x: x.id, target, weight }, vec![weight * sse / n], 1, 1, ng))
    }

    /// `sum(weights * x)` as a 1x1 tensor.
    pub fn dot(&mut self, x: DiffTensor, weights: &'a [f64]) -> Result<DiffTensor> {
        if weights.len() != x.len() {
            return Err(Error::precondition(format!("{} weights for {} samples", weights.len(), x.len())));
        }
        let v = self.value(x).iter().zip(weights).map(|(a, b)| a * b).sum();
        Ok(self.push(Op::Dot { x: x.id, weights }, vec![v], 1, 1, self.needs_grad[x.id]))
    }

    /// Sum of scalars.
    pub fn sum(&mut self, xs: &[DiffTensor]) -> Result<DiffTensor> {
        if let Some(bad) = xs.iter().find(|t| t.len() != 1) {
            return Err(Error::Dimension { expected: (1, 1), actual: bad.dims() });
        }
        let total = xs.iter().map(|&t| self.scalar(t)).sum();
        let ng = xs.iter().any(|t| self.needs_grad[t.id]);
        Ok(self.push(Op::Sum { xs: xs.iter().map(|t| t.id).collect() }, vec![total], 1, 1, ng))
    }

    /// Records an externally computed map `x -> value` with its vector-Jacobian product.
    pub fn custom(
        &mut self,
        x: DiffTensor,
        value: Vec<f64>,
        width: usize,
        height: usize,
        vjp: impl Fn(&[f64]) -> Vec<f64> + 'a,
    ) -> Result<DiffTensor> {
        if value.len() != width * height {
            return Err(Error::precondition(format!("{} values for a {width}x{height} tensor", value.len())));
        }
        let ng = self.needs_grad[x.id];
        Ok(self.push(Op::Custom { x: x.id, vjp: Box::new(vjp) }, value, width, height, ng))
    }

    /// Gradients of the scalar `loss` with respect to every upstream tensor.
    pub fn backward(&self, loss: DiffTensor) -> Result<Gradients> {
        if loss.len() != 1 {
            return Err(Error::Dimension { expected: (1, 1), actual: loss.dims() });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.id] = Some(vec![1.0]);
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.needs_grad[id] {
                continue;
            }
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Warp { x, field } => {
                    accumulate(&mut grads, &self.needs_grad, *x, warp_adjoint(&g, node.width, node.height, field))
                }
                Op::AddResidual { x } | Op::RoundSte { x } => accumulate(&mut grads, &self.needs_grad, *x, g),
                Op::Average { a, b } => {
                    let half: Vec<f64> = g.iter().map(|v| v * 0.5).collect();
                    accumulate(&mut grads, &self.needs_grad, *a, half.clone());
                    accumulate(&mut grads, &self.needs_grad, *b, half);
                }
                Op::Clip { x, lo, hi } => {
                    let xv = &self.nodes[*x].value;
                    let gx = g.iter().zip(xv).map(|(gv, v)| if *lo < *v && v < hi { *gv } else { 0.0 }).collect();
                    accumulate(&mut grads, &self.needs_grad, *x, gx);
                }
                Op::Deblock { x, mask } => accumulate(&mut grads, &self.needs_grad, *x, deblock_adjoint(&g, mask)),
                Op::Upsample { x } => {
                    let src = &self.nodes[*x];
                    accumulate(&mut grads, &self.needs_grad, *x, upsample2x_adjoint(&g, src.width, src.height));
                }
                Op::Mse { x, target, weight } => {
                    let xv = &self.nodes[*x].value;
                    let scale = 2.0 * weight * g[0] / xv.len().max(1) as f64;
                    let gx = xv.iter().zip(target.iter()).map(|(a, b)| scale * (a - b)).collect();
                    accumulate(&mut grads, &self.needs_grad, *x, gx);
                }
                Op::Dot { x, weights } => {
                    accumulate(&mut grads, &self.needs_grad, *x, weights.iter().map(|w| w * g[0]).collect())
                }
                Op::Sum { xs } => {
                    for &x in xs {
                        accumulate(&mut grads, &self.needs_grad, x, vec![g[0]]);
                    }
                }
                Op::Custom { x, vjp } => {
                    let gx = vjp(&g);
                    if gx.len() != self.nodes[*x].value.len() {
                        return Err(Error::precondition("custom vector-Jacobian product has the wrong length"));
                    }
                    accumulate(&mut grads, &self.needs_grad, *x, gx);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], needs_grad: &[bool], id: usize, g: Vec<f64>) {
    if !needs_grad[id] {
        return;
    }
    match &mut grads[id] {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}

/// Replays the decode of a GOP on the tape, starting from `i_frame`.
///
/// Motion fields, residuals and boundary masks come from `frozen` and stay
/// constant. Each unit runs warp (averaged for B), residual add, clip to
/// `[0, 1]` and deblock. Lossless units round their prediction to the 8-bit
/// grid before and after the residual add, with straight-through gradients,
/// so they reproduce the integer decoder exactly.
/// Returns the reconstructions in display order, `i_frame` first.
pub fn reconstruct_gop_diff<'a>(
    tape: &mut Tape<'a>,
    i_frame: DiffTensor,
    frozen: &'a FrozenGop,
) -> Result<Vec<DiffTensor>> {
    let dims = (frozen.width, frozen.height);
    if i_frame.dims() != dims {
        return Err(Error::Dimension { expected: dims, actual: i_frame.dims() });
    }
    let n = frozen.n_frames();
    let mut out: Vec<Option<DiffTensor>> = vec![None; n];
    out[0] = Some(i_frame);
    for unit in &frozen.units {
        let plan = &unit.plan;
        let structure = |msg: &str| Error::Structure(format!("frame {}: {msg}", plan.display));
        if plan.display >= n || out[plan.display].is_some() {
            return Err(structure("display index out of order"));
        }
        if plan.refs.len() != plan.kind.ref_count() || unit.fields.len() != plan.refs.len() {
            return Err(structure("reference count does not match the frame type"));
        }
        let mut warped = Vec::with_capacity(2);
        for (&r, field) in plan.refs.iter().zip(&unit.fields) {
            let src = out.get(r).copied().flatten().ok_or_else(|| structure("reference not reconstructed yet"))?;
            warped.push(tape.d_warp(src, field)?);
        }
        let mut pred = match (plan.kind, warped.as_slice()) {
            (FrameType::B, &[a, b]) => tape.d_average(a, b)?,
            (_, &[p]) => p,
            _ => return Err(structure("unexpected frame type")),
        };
        if unit.qp == 0 {
            pred = tape.d_round_ste(pred);
        }
        let mut summed = tape.d_add_residual(pred, &unit.residual)?;
        if unit.qp == 0 {
            summed = tape.d_round_ste(summed);
        }
        let clipped = tape.d_clip(summed, 0.0, 1.0);
        out[plan.display] = Some(tape.d_deblock(clipped, &unit.mask)?);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, t)| t.ok_or_else(|| Error::Structure(format!("frame {i} is never reconstructed"))))
        .collect()
}

/// `sum_t weights[t] * MSE(recons[t], targets[t])` as a 1x1 tensor.
pub fn gop_loss<'a>(
    tape: &mut Tape<'a>,
    recons: &[DiffTensor],
    targets: &'a [Frame],
    weights: &[f64],
) -> Result<DiffTensor> {
    if recons.len() != targets.len() || recons.len() != weights.len() {
        return Err(Error::precondition(format!(
            "{} reconstructions, {} targets, {} weights",
            recons.len(),
            targets.len(),
            weights.len()
        )));
    }
    let mut terms = Vec::with_capacity(recons.len());
    for ((&r, t), &w) in recons.iter().zip(targets).zip(weights) {
        if w < 0.0 || !w.is_finite() {
            return Err(Error::precondition(format!("loss weight {w} must be finite and non-negative")));
        }
        if r.dims() != t.dims() {
            return Err(Error::Dimension { expected: t.dims(), actual: r.dims() });
        }
        terms.push(tape.mse(r, t.data(), w)?);
    }
    tape.sum(&terms)
}
