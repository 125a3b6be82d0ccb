//! Common processing operations applied at controlled severity.
//!
//! Fourteen operations over four families: light (brightness, contrast,
//! exposure), colour (saturation, warmth, tint), details (blur, sharpen,
//! grain, JPEG), and geometry (crop, rotate, horizontal and vertical
//! perspective). Severity 0 is the byte-exact identity for every
//! operation; outputs are computed in f64, clipped to [0,255] and rounded
//! once at the end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{bilinear_resize, jpeg_cycle, quantize, ImageBuffer};
use crate::prng::SplitMix64;

/// The operation catalogue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelOpKind {
    Brightness,
    Contrast,
    Exposure,
    Saturation,
    Warmth,
    Tint,
    Blur,
    Sharpen,
    Grain,
    Jpeg,
    Crop,
    Rotate,
    PerspH,
    PerspV,
}

pub const ALL_OPS: [ChannelOpKind; 14] = [
    ChannelOpKind::Brightness,
    ChannelOpKind::Contrast,
    ChannelOpKind::Exposure,
    ChannelOpKind::Saturation,
    ChannelOpKind::Warmth,
    ChannelOpKind::Tint,
    ChannelOpKind::Blur,
    ChannelOpKind::Sharpen,
    ChannelOpKind::Grain,
    ChannelOpKind::Jpeg,
    ChannelOpKind::Crop,
    ChannelOpKind::Rotate,
    ChannelOpKind::PerspH,
    ChannelOpKind::PerspV,
];

impl ChannelOpKind {
    pub fn id(&self) -> &'static str {
        match self {
            ChannelOpKind::Brightness => "brightness",
            ChannelOpKind::Contrast => "contrast",
            ChannelOpKind::Exposure => "exposure",
            ChannelOpKind::Saturation => "saturation",
            ChannelOpKind::Warmth => "warmth",
            ChannelOpKind::Tint => "tint",
            ChannelOpKind::Blur => "blur",
            ChannelOpKind::Sharpen => "sharpen",
            ChannelOpKind::Grain => "grain",
            ChannelOpKind::Jpeg => "jpeg",
            ChannelOpKind::Crop => "crop",
            ChannelOpKind::Rotate => "rotate",
            ChannelOpKind::PerspH => "persp_h",
            ChannelOpKind::PerspV => "persp_v",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        ALL_OPS
            .iter()
            .copied()
            .find(|op| op.id() == id)
            .ok_or_else(|| Error::InvalidParam(format!("unknown channel op {id:?}")))
    }

    /// Signed operations sweep [-1, 1] around a neutral zero; one-sided
    /// operations sweep [0, 1].
    pub fn signed(&self) -> bool {
        matches!(
            self,
            ChannelOpKind::Brightness
                | ChannelOpKind::Contrast
                | ChannelOpKind::Exposure
                | ChannelOpKind::Saturation
                | ChannelOpKind::Warmth
                | ChannelOpKind::Tint
                | ChannelOpKind::Sharpen
                | ChannelOpKind::Rotate
        )
    }
}

/// One operation at one severity; `seed` feeds grain noise only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelOp {
    pub kind: ChannelOpKind,
    pub severity: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ChannelOp {
    pub fn new(kind: ChannelOpKind, severity: f64) -> Self {
        Self {
            kind,
            severity,
            seed: 0,
        }
    }

    pub fn with_seed(kind: ChannelOpKind, severity: f64, seed: u64) -> Self {
        Self {
            kind,
            severity,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let lo = if self.kind.signed() { -1.0 } else { 0.0 };
        if !self.severity.is_finite() || self.severity < lo || self.severity > 1.0 {
            return Err(Error::InvalidParam(format!(
                "severity {} out of [{lo}, 1] for op {}",
                self.severity,
                self.kind.id()
            )));
        }
        Ok(())
    }
}

/// Apply one operation. Dimensions are always preserved.
pub fn apply(img: &ImageBuffer, op: &ChannelOp) -> Result<ImageBuffer> {
    op.validate()?;
    if op.severity == 0.0 {
        return Ok(img.clone());
    }
    let s = op.severity;
    let out = match op.kind {
        ChannelOpKind::Brightness => pointwise(img, |px| px.map(|v| v + 64.0 * s)),
        ChannelOpKind::Contrast => {
            pointwise(img, |px| px.map(|v| (v - 128.0) * (1.0 + 0.8 * s) + 128.0))
        }
        ChannelOpKind::Exposure => {
            let gain = 2f64.powf(s);
            pointwise(img, |px| px.map(|v| v * gain))
        }
        // The colour family scales each channel's distance from luma, so a
        // greyscale image is left untouched and the luminance plane moves
        // only by rounding.
        ChannelOpKind::Saturation => pointwise(img, |px| {
            let y = luma_of(px);
            px.map(|v| y + (v - y) * (1.0 + s))
        }),
        ChannelOpKind::Warmth => pointwise(img, |px| {
            let y = luma_of(px);
            [
                y + (px[0] - y) * (1.0 + 0.3 * s),
                px[1],
                y + (px[2] - y) * (1.0 - 0.3 * s),
            ]
        }),
        ChannelOpKind::Tint => pointwise(img, |px| {
            let y = luma_of(px);
            [
                y + (px[0] - y) * (1.0 - 0.15 * s),
                y + (px[1] - y) * (1.0 + 0.3 * s),
                y + (px[2] - y) * (1.0 - 0.15 * s),
            ]
        }),
        ChannelOpKind::Blur => gaussian_blur(img, 3.0 * s),
        ChannelOpKind::Sharpen => unsharp_mask(img, s),
        ChannelOpKind::Grain => grain(img, 25.0 * s, op.seed),
        ChannelOpKind::Jpeg => {
            let quality = (95.0 - 85.0 * s).round().clamp(1.0, 100.0) as u8;
            return Ok(jpeg_cycle(img, quality));
        }
        ChannelOpKind::Crop => crop_zoom(img, 1.0 - 0.5 * s),
        ChannelOpKind::Rotate => rotate(img, 45.0 * s),
        ChannelOpKind::PerspH => perspective(img, 0.25 * s, true),
        ChannelOpKind::PerspV => perspective(img, 0.25 * s, false),
    };
    ImageBuffer::new(img.width(), img.height(), quantize(&out))
}

fn to_f64(img: &ImageBuffer) -> Vec<f64> {
    img.data().iter().map(|&v| v as f64).collect()
}

#[inline]
fn luma_of(px: [f64; 3]) -> f64 {
    0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]
}

fn pointwise(img: &ImageBuffer, f: impl Fn([f64; 3]) -> [f64; 3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        let mapped = f([px[0] as f64, px[1] as f64, px[2] as f64]);
        out.extend_from_slice(&mapped);
    }
    out
}

/// Separable Gaussian with replicated edges; kernel radius covers 3 sigma.
fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> Vec<f64> {
    blur_samples(
        &to_f64(img),
        img.width() as usize,
        img.height() as usize,
        sigma,
    )
}

fn blur_samples(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    let mut sum = 0.0;
    for k in -(radius as i64)..=(radius as i64) {
        let v = (-(k as f64 * k as f64) / (2.0 * sigma * sigma)).exp();
        kernel.push(v);
        sum += v;
    }
    for v in &mut kernel {
        *v /= sum;
    }

    let mut tmp = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (ki, &kv) in kernel.iter().enumerate() {
                    let sx = (x as i64 + ki as i64 - radius as i64).clamp(0, w as i64 - 1) as usize;
                    acc += kv * src[(y * w + sx) * 3 + c];
                }
                tmp[(y * w + x) * 3 + c] = acc;
            }
        }
    }
    let mut out = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (ki, &kv) in kernel.iter().enumerate() {
                    let sy = (y as i64 + ki as i64 - radius as i64).clamp(0, h as i64 - 1) as usize;
                    acc += kv * tmp[(sy * w + x) * 3 + c];
                }
                out[(y * w + x) * 3 + c] = acc;
            }
        }
    }
    out
}

/// `v + 2s (v - blur_sigma1(v))`.
fn unsharp_mask(img: &ImageBuffer, s: f64) -> Vec<f64> {
    let src = to_f64(img);
    let soft = blur_samples(&src, img.width() as usize, img.height() as usize, 1.0);
    src.iter()
        .zip(&soft)
        .map(|(&v, &b)| v + s * 2.0 * (v - b))
        .collect()
}

/// Additive Gaussian noise, per sample, Box-Muller over SplitMix64(seed).
fn grain(img: &ImageBuffer, std: f64, seed: u64) -> Vec<f64> {
    let src = to_f64(img);
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(src.len());
    let mut pending: Option<f64> = None;
    for &v in &src {
        let z = match pending.take() {
            Some(z) => z,
            None => {
                let (z0, z1) = rng.next_gaussian_pair();
                pending = Some(z1);
                z0
            }
        };
        out.push(v + std * z);
    }
    out
}

/// Central crop retaining `frac` per axis, bilinearly resized back.
fn crop_zoom(img: &ImageBuffer, frac: f64) -> Vec<f64> {
    let w = img.width() as usize;
    let h = img.height() as usize;
    let keep_w = ((w as f64 * frac).round() as usize).clamp(1, w);
    let keep_h = ((h as f64 * frac).round() as usize).clamp(1, h);
    let off_x = (w - keep_w) / 2;
    let off_y = (h - keep_h) / 2;
    let src = to_f64(img);
    let mut cropped = Vec::with_capacity(keep_w * keep_h * 3);
    for y in 0..keep_h {
        let base = ((y + off_y) * w + off_x) * 3;
        cropped.extend_from_slice(&src[base..base + keep_w * 3]);
    }
    bilinear_resize(
        &cropped,
        keep_w as u32,
        keep_h as u32,
        img.width(),
        img.height(),
    )
}

/// Sample with bilinear taps; out-of-frame taps contribute black.
fn sample_black(src: &[f64], w: usize, h: usize, x: f64, y: f64, c: usize) -> f64 {
    let x0 = x.floor() as i64;
    let y0 = y.floor() as i64;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let mut acc = 0.0;
    for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let sx = x0 + dx;
            let sy = y0 + dy;
            if sx >= 0 && sx < w as i64 && sy >= 0 && sy < h as i64 {
                acc += wx * wy * src[(sy as usize * w + sx as usize) * 3 + c];
            }
        }
    }
    acc
}

/// Rotate about the centre by `degrees`, bilinear, black fill.
fn rotate(img: &ImageBuffer, degrees: f64) -> Vec<f64> {
    let w = img.width() as usize;
    let h = img.height() as usize;
    let src = to_f64(img);
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            // Inverse map: rotate the output position back by -theta.
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = cx + cos * dx + sin * dy;
            let sy = cy - sin * dx + cos * dy;
            for c in 0..3 {
                out.push(sample_black(&src, w, h, sx, sy, c));
            }
        }
    }
    out
}

/// Projective warp defined by its action on the four edge midpoints: the
/// two midpoints on the swept axis move inward by `pull` (as a fraction of
/// that axis), the other two stay fixed. Bilinear, black fill.
fn perspective(img: &ImageBuffer, pull: f64, horizontal: bool) -> Vec<f64> {
    let w = img.width() as usize;
    let h = img.height() as usize;
    let wf = img.width() as f64 - 1.0;
    let hf = img.height() as f64 - 1.0;
    let (left, right, top, bottom) = (
        (0.0, hf / 2.0),
        (wf, hf / 2.0),
        (wf / 2.0, 0.0),
        (wf / 2.0, hf),
    );
    let src_pts = [left, right, top, bottom];
    let dst_pts = if horizontal {
        let d = pull * wf;
        [(d, hf / 2.0), (wf - d, hf / 2.0), top, bottom]
    } else {
        let d = pull * hf;
        [left, right, (wf / 2.0, d), (wf / 2.0, hf - d)]
    };
    // Inverse mapping: output position -> source position.
    let hm = Homography::from_points(&dst_pts, &src_pts);
    let src = to_f64(img);
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = hm.map(x as f64, y as f64);
            for c in 0..3 {
                out.push(sample_black(&src, w, h, sx, sy, c));
            }
        }
    }
    out
}

/// Plane projective transform fitted to four point correspondences.
struct Homography {
    m: [f64; 9],
}

impl Homography {
    /// Solve the 8x8 linear system for the homography mapping `src[i]` to
    /// `dst[i]` (h33 fixed at 1).
    fn from_points(src: &[(f64, f64); 4], dst: &[(f64, f64); 4]) -> Self {
        let mut a = [[0.0f64; 9]; 8];
        for i in 0..4 {
            let (x, y) = src[i];
            let (u, v) = dst[i];
            a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
            a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
        }
        // Gaussian elimination with partial pivoting on the augmented matrix.
        for col in 0..8 {
            let mut pivot = col;
            for row in col + 1..8 {
                if a[row][col].abs() > a[pivot][col].abs() {
                    pivot = row;
                }
            }
            a.swap(col, pivot);
            let p = a[col][col];
            debug_assert!(p.abs() > 1e-12, "degenerate correspondence");
            for v in a[col][col..].iter_mut() {
                *v /= p;
            }
            let pivot_row = a[col];
            for (row, entries) in a.iter_mut().enumerate() {
                let f = entries[col];
                if row != col && f != 0.0 {
                    for (v, pv) in entries[col..].iter_mut().zip(&pivot_row[col..]) {
                        *v -= f * pv;
                    }
                }
            }
        }
        let mut m = [0.0f64; 9];
        for (i, entry) in m.iter_mut().take(8).enumerate() {
            *entry = a[i][8];
        }
        m[8] = 1.0;
        Self { m }
    }

    #[inline]
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        let d = m[6] * x + m[7] * y + m[8];
        (
            (m[0] * x + m[1] * y + m[2]) / d,
            (m[3] * x + m[4] * y + m[5]) / d,
        )
    }
}
