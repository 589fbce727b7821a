//! Align-corners bilinear 2x upsampling.
//!
//! Output sample `X` of `2w` reads the input at `u = X (w - 1) / (2w - 1)`, so
//! the first and last output samples sit exactly on the first and last input
//! samples. Rows follow the same rule.

/// `(i0, i1, frac)` taps for each output position.
fn taps(n_in: usize) -> Vec<(usize, usize, f64)> {
    let n_out = 2 * n_in;
    (0..n_out)
        .map(|o| {
            if n_in == 1 {
                return (0, 0, 0.0);
            }
            let u = o as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
            let i0 = (u.floor() as usize).min(n_in - 2);
            (i0, i0 + 1, u - i0 as f64)
        })
        .collect()
}

pub fn upsample2x_raster(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let (tx, ty) = (taps(w), taps(h));
    let ow = 2 * w;
    // Horizontal pass into an (ow x h) buffer, then vertical.
    let mut mid = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (x, &(a, b, f)) in tx.iter().enumerate() {
            mid[y * ow + x] = row[a] * (1.0 - f) + row[b] * f;
        }
    }
    let mut out = vec![0.0; ow * 2 * h];
    for (y, &(a, b, f)) in ty.iter().enumerate() {
        for x in 0..ow {
            out[y * ow + x] = mid[a * ow + x] * (1.0 - f) + mid[b * ow + x] * f;
        }
    }
    out
}

/// Transpose of [`upsample2x_raster`]; `w x h` is the low-resolution size.
pub fn upsample2x_adjoint(grad_out: &[f64], w: usize, h: usize) -> Vec<f64> {
    let (tx, ty) = (taps(w), taps(h));
    let ow = 2 * w;
    let mut g_mid = vec![0.0; ow * h];
    for (y, &(a, b, f)) in ty.iter().enumerate() {
        for x in 0..ow {
            let g = grad_out[y * ow + x];
            g_mid[a * ow + x] += g * (1.0 - f);
            g_mid[b * ow + x] += g * f;
        }
    }
    let mut g_src = vec![0.0; w * h];
    for y in 0..h {
        for (x, &(a, b, f)) in tx.iter().enumerate() {
            let g = g_mid[y * ow + x];
            g_src[y * w + a] += g * (1.0 - f);
            g_src[y * w + b] += g * f;
        }
    }
    g_src
}
