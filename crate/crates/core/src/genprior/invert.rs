//! Latent inversion with adaptive-moment gradient descent.

use super::{Generator, LatentCode};
use crate::diff::Tape;
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub iters: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { iters: 800, lr: 1e-2, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if !ok {
            return Err(Error::precondition(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

/// MSE of an error of one 8-bit code value everywhere.
pub const LSB_MSE: f64 = 1.0 / (255.0 * 255.0);

/// Bias-corrected adaptive-moment update.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: OptimizerConfig,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: OptimizerConfig, lr: f64, dim: usize) -> Self {
        Adam { cfg, lr, m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.cfg.eps);
        }
    }
}

/// Result of [`invert`].
#[derive(Debug, Clone)]
pub struct Inversion {
    pub latent: LatentCode,
    /// Loss before each update, followed by the loss of the final iterate.
    pub trace: Vec<f64>,
    pub best_loss: f64,
    /// Whether the divergence guard restarted with a halved step.
    pub restarted: bool,
}

fn loss_and_grad(generator: &Generator, z: &[f64], target: &Frame) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let leaf = tape.leaf(z.to_vec(), z.len(), 1, true)?;
    let img = generator.record_iframe(&mut tape, leaf)?;
    let loss = tape.mse(img, target.data(), 1.0)?;
    let grads = tape.backward(loss)?;
    Ok((tape.scalar(loss), grads.dense(leaf)))
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone)]
pub struct Minimized {
    pub best: Vec<f64>,
    pub best_loss: f64,
    /// Loss before each update, followed by the loss of the final iterate.
    pub trace: Vec<f64>,
    pub restarted: bool,
}

enum Attempt {
    Done(Vec<f64>, f64, Vec<f64>),
    Diverged,
}

fn attempt(
    x0: &[f64],
    opt: &OptimizerConfig,
    lr: f64,
    floor: f64,
    f: &mut impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
) -> Result<Attempt> {
    let mut x = x0.to_vec();
    let mut adam = Adam::new(*opt, lr, x.len());
    let (initial, mut grad) = f(&x)?;
    if !initial.is_finite() {
        return Err(Error::Divergence(format!("initial loss is {initial}")));
    }
    let mut trace = vec![initial];
    let (mut best, mut best_loss) = (x.clone(), initial);
    for _ in 0..opt.iters {
        adam.step(&mut x, &grad);
        let (loss, g) = f(&x)?;
        if !loss.is_finite() || loss > 10.0 * initial.max(floor) {
            return Ok(Attempt::Diverged);
        }
        trace.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best.copy_from_slice(&x);
        }
        grad = g;
    }
    Ok(Attempt::Done(best, best_loss, trace))
}

/// Adaptive-moment descent from `x0` that keeps the best iterate seen.
///
/// If the loss exceeds ten times its initial value (or ten times `floor`,
/// whichever is larger) the run restarts once from `x0` with half the step
/// size; a second blow-up is a divergence error. The floor keeps a start that
/// is already near-exact from counting small excursions as divergence.
pub fn minimize(
    x0: &[f64],
    opt: &OptimizerConfig,
    floor: f64,
    mut f: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
) -> Result<Minimized> {
    opt.validate()?;
    let mut restarted = false;
    let mut lr = opt.lr;
    loop {
        match attempt(x0, opt, lr, floor, &mut f)? {
            Attempt::Done(best, best_loss, trace) => return Ok(Minimized { best, best_loss, trace, restarted }),
            Attempt::Diverged if !restarted => {
                restarted = true;
                lr *= 0.5;
            }
            Attempt::Diverged => {
                return Err(Error::Divergence(format!("loss blew up twice (last step size {lr})")));
            }
        }
    }
}

/// Finds a latent whose generated keyframe approximates `target` in MSE,
/// starting from `z = 0`.
pub fn invert(generator: &Generator, target: &Frame, opt: &OptimizerConfig) -> Result<Inversion> {
    let spec = generator.spec();
    target.check_dims((spec.width, spec.height))?;
    let m = minimize(&vec![0.0; spec.latent_dim], opt, LSB_MSE, |z| loss_and_grad(generator, z, target))?;
    Ok(Inversion {
        latent: LatentCode::new(m.best, spec),
        trace: m.trace,
        best_loss: m.best_loss,
        restarted: m.restarted,
    })
}
