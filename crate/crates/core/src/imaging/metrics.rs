//! Full-reference quality metrics: PSNR and SSIM.

use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::exec;
use crate::imaging::{to_luma, ImageBuffer};

/// Peak signal-to-noise ratio in decibels over all RGB samples.
/// Identical inputs yield `f64::INFINITY`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    a.same_dims(b).expect("psnr requires equal dimensions");
    psnr_checked(a, b).unwrap()
}

/// Fallible variant of [`psnr`] for callers handling user input.
pub fn psnr_checked(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.same_dims(b)?;
    let sse: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / a.data().len() as f64;
    Ok(10.0 * (255.0_f64 * 255.0 / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_L: f64 = 255.0;

static WINDOW: LazyLock<[f64; SSIM_WINDOW * SSIM_WINDOW]> = LazyLock::new(|| {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let dx = x as f64 - c;
            let dy = y as f64 - c;
            let v = (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[y * SSIM_WINDOW + x] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
});

/// Structural similarity on luminance: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, L = 255, averaged over fully interior window
/// positions.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.same_dims(b)?;
    let w = a.width() as usize;
    let h = a.height() as usize;
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall {
            width: a.width(),
            height: a.height(),
            min: SSIM_WINDOW as u32,
        });
    }
    let la = to_luma(a);
    let lb = to_luma(b);
    let xa = la.data();
    let xb = lb.data();
    let window = &*WINDOW;
    let c1 = (SSIM_K1 * SSIM_L) * (SSIM_K1 * SSIM_L);
    let c2 = (SSIM_K2 * SSIM_L) * (SSIM_K2 * SSIM_L);
    let rows = h - SSIM_WINDOW + 1;
    let cols = w - SSIM_WINDOW + 1;

    // Row results are reduced in index order so the total is independent of
    // the thread count.
    let row_sums = exec::map_range(rows, |y| {
        let mut acc = 0.0;
        for x in 0..cols {
            let mut mu_x = 0.0;
            let mut mu_y = 0.0;
            let mut xx = 0.0;
            let mut yy = 0.0;
            let mut xy = 0.0;
            for wy in 0..SSIM_WINDOW {
                let base = (y + wy) * w + x;
                for wx in 0..SSIM_WINDOW {
                    let weight = window[wy * SSIM_WINDOW + wx];
                    let pa = xa[base + wx];
                    let pb = xb[base + wx];
                    mu_x += weight * pa;
                    mu_y += weight * pb;
                    xx += weight * (pa * pa);
                    yy += weight * (pb * pb);
                    // Grouped so the result is bit-symmetric in (a, b).
                    xy += weight * (pa * pb);
                }
            }
            let var_x = xx - mu_x * mu_x;
            let var_y = yy - mu_y * mu_y;
            let cov = xy - mu_x * mu_y;
            let num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
            let den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
            acc += num / den;
        }
        acc
    });
    let total: f64 = row_sums.iter().sum();
    Ok(total / (rows * cols) as f64)
}
