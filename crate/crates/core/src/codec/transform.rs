//! 8x8 residual transform and scalar quantizer.
//!
//! Residuals are in 8-bit sample units. For `qp > 0` blocks go through an
//! orthonormal 2D DCT-II and are quantized with step `2^((qp - 4) / 6)`.
//! `qp == 0` bypasses both and carries the spatial integers unchanged.
//! Coefficients are stored in zigzag order.

use std::sync::OnceLock;

use super::config::TRANSFORM_BLOCK as N;
use crate::error::{Error, Result};

pub const BLOCK_LEN: usize = N * N;

pub type Block = [f64; BLOCK_LEN];
pub type Coeffs = [i16; BLOCK_LEN];

#[rustfmt::skip]
pub const ZIGZAG: [usize; BLOCK_LEN] = [
     0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
];

/// Quantizer step for a qp; doubles every 6 steps and equals 1 at qp 4.
pub fn qstep(qp: u8) -> f64 {
    2f64.powf((f64::from(qp) - 4.0) / 6.0)
}

fn dct_matrix() -> &'static [[f64; N]; N] {
    static M: OnceLock<[[f64; N]; N]> = OnceLock::new();
    M.get_or_init(|| {
        let mut m = [[0.0; N]; N];
        for (k, row) in m.iter_mut().enumerate() {
            let alpha = if k == 0 { (1.0 / N as f64).sqrt() } else { (2.0 / N as f64).sqrt() };
            for (n, v) in row.iter_mut().enumerate() {
                *v = alpha * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * N) as f64).cos();
            }
        }
        m
    })
}

/// Row-major forward DCT: `C x C^T`.
pub fn dct2(x: &Block) -> Block {
    let c = dct_matrix();
    let mut tmp = [0.0; BLOCK_LEN];
    for r in 0..N {
        for k in 0..N {
            tmp[r * N + k] = (0..N).map(|n| c[k][n] * x[r * N + n]).sum();
        }
    }
    let mut out = [0.0; BLOCK_LEN];
    for k in 0..N {
        for col in 0..N {
            out[k * N + col] = (0..N).map(|r| c[k][r] * tmp[r * N + col]).sum();
        }
    }
    out
}

/// Inverse of [`dct2`]: `C^T X C`.
pub fn idct2(x: &Block) -> Block {
    let c = dct_matrix();
    let mut tmp = [0.0; BLOCK_LEN];
    for r in 0..N {
        for n in 0..N {
            tmp[r * N + n] = (0..N).map(|k| c[k][n] * x[r * N + k]).sum();
        }
    }
    let mut out = [0.0; BLOCK_LEN];
    for n in 0..N {
        for col in 0..N {
            out[n * N + col] = (0..N).map(|k| c[k][n] * tmp[k * N + col]).sum();
        }
    }
    out
}

fn to_i16(v: f64) -> Result<i16> {
    let r = v.round();
    if r.abs() > f64::from(i16::MAX) || !r.is_finite() {
        return Err(Error::CoefficientOverflow { value: r as i64 });
    }
    Ok(r as i16)
}

pub fn transform_quant(residual: &Block, qp: u8) -> Result<Coeffs> {
    let mut out = [0i16; BLOCK_LEN];
    if qp == 0 {
        for (z, &pos) in ZIGZAG.iter().enumerate() {
            out[z] = to_i16(residual[pos])?;
        }
        return Ok(out);
    }
    let coef = dct2(residual);
    let step = qstep(qp);
    for (z, &pos) in ZIGZAG.iter().enumerate() {
        out[z] = to_i16(coef[pos] / step)?;
    }
    Ok(out)
}

pub fn dequant_itransform(coeffs: &Coeffs, qp: u8) -> Block {
    let mut raster = [0.0; BLOCK_LEN];
    if qp == 0 {
        for (z, &pos) in ZIGZAG.iter().enumerate() {
            raster[pos] = f64::from(coeffs[z]);
        }
        return raster;
    }
    let step = qstep(qp);
    for (z, &pos) in ZIGZAG.iter().enumerate() {
        raster[pos] = f64::from(coeffs[z]) * step;
    }
    idct2(&raster)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zigzag_is_a_permutation() {
        let mut seen = [false; BLOCK_LEN];
        for &p in &ZIGZAG {
            assert!(!seen[p]);
            seen[p] = true;
        }
    }

    #[test]
    fn qstep_law() {
        assert_eq!(qstep(4), 1.0);
        assert!((qstep(10) - 2.0).abs() < 1e-15);
        assert!((qstep(22) - 8.0).abs() < 1e-13);
    }

    #[test]
    fn zero_block_any_qp() {
        for qp in [0, 1, 10, 51] {
            assert_eq!(transform_quant(&[0.0; BLOCK_LEN], qp).unwrap(), [0; BLOCK_LEN]);
        }
    }

    #[test]
    fn qp4_is_rounded_dct() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let block: Block = std::array::from_fn(|_| rng.random_range(-40.0..40.0));
        let coef = dct2(&block);
        let q = transform_quant(&block, 4).unwrap();
        for (z, &pos) in ZIGZAG.iter().enumerate() {
            assert_eq!(f64::from(q[z]), coef[pos].round());
        }
    }

    #[test]
    fn dc_only_block_golden() {
        // Constant 0.5: orthonormal DC gain is 8, so DC = 4; step(10) = 2 -> 2.
        let q = transform_quant(&[0.5; BLOCK_LEN], 10).unwrap();
        assert_eq!(q[0], 2);
        assert!(q[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn qp0_roundtrip_exact() {
        let block: Block = std::array::from_fn(|i| i as f64 - 32.0);
        let back = dequant_itransform(&transform_quant(&block, 0).unwrap(), 0);
        assert_eq!(back, block);
    }

    #[test]
    fn overflow_is_an_error() {
        let block = [1.0e6; BLOCK_LEN];
        assert!(matches!(transform_quant(&block, 4), Err(Error::CoefficientOverflow { .. })));
    }

    #[test]
    fn golden_block_roundtrip_qp20() {
        // Block b[r][c] = 3r - 2c + ((r * c) % 5); squared error of the qp 20 roundtrip, frozen.
        let block: Block = std::array::from_fn(|i| {
            let (r, c) = ((i / 8) as f64, (i % 8) as f64);
            3.0 * r - 2.0 * c + ((i / 8 * (i % 8)) % 5) as f64
        });
        let back = dequant_itransform(&transform_quant(&block, 20).unwrap(), 20);
        let mse: f64 = block.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 64.0;
        assert!((mse - GOLDEN_QP20_MSE).abs() < 1e-9, "mse {mse}");
    }

    // Cross-checked against scipy.fft.dctn(norm="ortho") with round-half-away quantization.
    const GOLDEN_QP20_MSE: f64 = 1.7731837701219353;

    proptest! {
        #[test]
        fn dct_orthonormal(vals in prop::collection::vec(-255.0f64..255.0, BLOCK_LEN)) {
            let block: Block = vals.try_into().unwrap();
            let back = idct2(&dct2(&block));
            let err = block.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err < 1e-9);
        }

        #[test]
        fn quant_error_within_half_step(vals in prop::collection::vec(-255.0f64..255.0, BLOCK_LEN), qp in 1u8..=51) {
            let block: Block = vals.try_into().unwrap();
            let q = transform_quant(&block, qp).unwrap();
            let coef = dct2(&block);
            let step = qstep(qp);
            for (z, &pos) in ZIGZAG.iter().enumerate() {
                prop_assert!((f64::from(q[z]) * step - coef[pos]).abs() <= step / 2.0 + 1e-9);
            }
        }
    }
}
