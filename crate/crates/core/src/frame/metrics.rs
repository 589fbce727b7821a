use std::fmt::Write as _;

use super::Frame;
use crate::error::{Error, Result};

pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension { expected: a.dims(), actual: b.dims() });
    }
    let n = a.data().len() as f64;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n)
}

/// `10 log10(1 / mse)`; identical inputs give `f64::INFINITY`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    mse(a, b).map(psnr_from_mse)
}

/// PSNR of a group of frames computed from their pooled MSE.
pub fn gop_psnr(recon: &[Frame], source: &[Frame]) -> Result<f64> {
    if recon.len() != source.len() || recon.is_empty() {
        return Err(Error::precondition("gop_psnr needs equally sized non-empty frame lists"));
    }
    let mut total = 0.0;
    for (r, s) in recon.iter().zip(source) {
        total += mse(r, s)?;
    }
    Ok(psnr_from_mse(total / recon.len() as f64))
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QualityReport {
    pub per_frame_mse: Vec<f64>,
    /// Infinite entries mark frames identical to their source.
    pub per_frame_psnr: Vec<f64>,
    /// PSNR of the pooled MSE over all frames.
    pub mean_psnr: f64,
    pub bytes_per_frame: Vec<usize>,
}

impl QualityReport {
    pub fn new(recon: &[Frame], source: &[Frame], bytes_per_frame: Vec<usize>) -> Result<Self> {
        if recon.len() != source.len() || bytes_per_frame.len() != recon.len() {
            return Err(Error::precondition("quality report inputs differ in length"));
        }
        let per_frame_mse = recon.iter().zip(source).map(|(r, s)| mse(r, s)).collect::<Result<Vec<_>>>()?;
        let per_frame_psnr = per_frame_mse.iter().map(|&m| psnr_from_mse(m)).collect();
        let pooled = per_frame_mse.iter().sum::<f64>() / per_frame_mse.len().max(1) as f64;
        Ok(QualityReport { per_frame_mse, per_frame_psnr, mean_psnr: psnr_from_mse(pooled), bytes_per_frame })
    }

    pub fn is_lossless(&self, frame: usize) -> bool {
        self.per_frame_psnr[frame].is_infinite()
    }

    /// CSV with columns `frame_index,bytes,mse,psnr`; infinite PSNR is written as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_index,bytes,mse,psnr\n");
        for (i, ((m, p), b)) in
            self.per_frame_mse.iter().zip(&self.per_frame_psnr).zip(&self.bytes_per_frame).enumerate()
        {
            writeln!(out, "{i},{b},{m:.9},{}", fmt_db(*p)).unwrap();
        }
        out
    }
}
