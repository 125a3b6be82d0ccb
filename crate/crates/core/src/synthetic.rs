//! Deterministic synthetic photographs.
//!
//! Benchmarks and tests need image pools with natural-image statistics
//! (smooth regions, edges, texture, correlated colour channels) without
//! shipping a dataset. The generator composes seeded value-noise octaves,
//! oriented cosine gratings and a global gradient, then maps the field
//! through a two-colour palette. Same seed, same bytes, on any platform.

use crate::imaging::ImageBuffer;
use crate::prng::SplitMix64;

/// Generate one synthetic image. Samples stay within [8, 247] so mild
/// photometric edits do not clip.
pub fn generate(seed: u64, width: u32, height: u32) -> ImageBuffer {
    let mut rng = SplitMix64::new(seed);
    let w = width as usize;
    let h = height as usize;

    let octaves = [(4, 0.45), (12, 0.30), (40, 0.15)];
    let lattices: Vec<(usize, f64, Vec<f64>)> = octaves
        .iter()
        .map(|&(cells, weight)| {
            let vals = (0..(cells + 1) * (cells + 1))
                .map(|_| rng.next_f64())
                .collect();
            (cells, weight, vals)
        })
        .collect();

    // A few oriented gratings supply mid-frequency structure.
    let gratings: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let cycles = 1.0 + rng.next_f64() * 9.0;
            let angle = rng.next_f64() * std::f64::consts::TAU;
            let phase = rng.next_f64() * std::f64::consts::TAU;
            let amp = 0.03 + rng.next_f64() * 0.05;
            (cycles, angle, phase, amp)
        })
        .collect();

    let grad_x = rng.next_f64() - 0.5;
    let grad_y = rng.next_f64() - 0.5;

    // Two palette endpoints; pixels interpolate between them by field value.
    let c0: [f64; 3] = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
    let c1: [f64; 3] = [rng.next_f64(), rng.next_f64(), rng.next_f64()];

    let mut field = vec![0.0f64; w * h];
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for y in 0..h {
        let fy = y as f64 / h as f64;
        for x in 0..w {
            let fx = x as f64 / w as f64;
            let mut v = 0.0;
            for (cells, weight, vals) in &lattices {
                v += weight * lattice_sample(vals, *cells, fx, fy);
            }
            for &(cycles, angle, phase, amp) in &gratings {
                let t = std::f64::consts::TAU * cycles * (fx * angle.cos() + fy * angle.sin());
                v += amp * (t + phase).sin();
            }
            v += 0.18 * (grad_x * fx + grad_y * fy);
            min = min.min(v);
            max = max.max(v);
            field[y * w + x] = v;
        }
    }
    let span = (max - min).max(1e-12);

    let mut data = Vec::with_capacity(w * h * 3);
    let mut noise = SplitMix64::new(seed ^ 0x9D2C_5680_1F83_D9AB);
    for &v in &field {
        let t = (v - min) / span;
        for c in 0..3 {
            let base = c0[c] + (c1[c] - c0[c]) * t;
            let grainy = base * 231.0 + 8.0 + (noise.next_f64() - 0.5) * 6.0;
            data.push(grainy.clamp(8.0, 247.0).round() as u8);
        }
    }
    ImageBuffer::new(width, height, data).expect("generator dimensions are valid")
}

/// A pool of generated images with consecutive derived seeds.
pub fn corpus(seed: u64, count: usize, width: u32, height: u32) -> Vec<ImageBuffer> {
    (0..count)
        .map(|i| {
            generate(
                crate::prng::derive_stream(seed, i as u64).next_u64(),
                width,
                height,
            )
        })
        .collect()
}

fn lattice_sample(vals: &[f64], cells: usize, fx: f64, fy: f64) -> f64 {
    let gx = fx * cells as f64;
    let gy = fy * cells as f64;
    let x0 = gx.floor() as usize;
    let y0 = gy.floor() as usize;
    let x1 = (x0 + 1).min(cells);
    let y1 = (y0 + 1).min(cells);
    let tx = smooth(gx - x0 as f64);
    let ty = smooth(gy - y0 as f64);
    let stride = cells + 1;
    let top = vals[y0 * stride + x0] + (vals[y0 * stride + x1] - vals[y0 * stride + x0]) * tx;
    let bot = vals[y1 * stride + x0] + (vals[y1 * stride + x1] - vals[y1 * stride + x0]) * tx;
    top + (bot - top) * ty
}

#[inline]
fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}
