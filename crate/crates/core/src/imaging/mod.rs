//! Image buffers, file I/O, and luminance handling.
//!
//! All DSP paths work in f64; 8-bit samples exist only at the image
//! boundary. Dimensions must be positive multiples of 8 — inputs that are
//! not are rejected, never silently padded.

mod dct;
mod metrics;

pub(crate) use dct::dct_matrix as dct_matrix_for;
pub use dct::{block_dct, block_idct, CoeffGrid, ZIGZAG};
pub use metrics::{psnr, psnr_checked, ssim};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::ImageReader;

use crate::error::{Error, Result};

/// BT.601 luma weights.
const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// 8-bit RGB raster, row-major, channel-interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl ImageBuffer {
    /// Wrap raw interleaved RGB samples. Dimensions must be positive
    /// multiples of 8 and `data` must hold exactly `width * height * 3`
    /// samples.
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::InvalidParam(format!(
                "sample buffer holds {} bytes, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub(crate) fn same_dims(&self, other: &ImageBuffer) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                expected_width: self.width,
                expected_height: self.height,
                got_width: other.width,
                got_height: other.height,
            });
        }
        Ok(())
    }
}

/// Real-valued luminance plane, nominal range [0, 255].
#[derive(Clone, Debug)]
pub struct LumaPlane {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl LumaPlane {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidParam(format!(
                "luma buffer holds {} samples, expected {}",
                data.len(),
                width as usize * height as usize
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || !width.is_multiple_of(8) {
        return Err(Error::Dimension {
            axis: "width",
            size: width,
        });
    }
    if height == 0 || !height.is_multiple_of(8) {
        return Err(Error::Dimension {
            axis: "height",
            size: height,
        });
    }
    Ok(())
}

/// Output format for [`save_image`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaveFormat {
    Png,
    /// Baseline JPEG at the given quality (1-100).
    Jpeg {
        quality: u8,
    },
}

/// Decode a PNG or JPEG file into an RGB buffer.
///
/// Greyscale inputs are expanded to three channels. Dimensions that are not
/// positive multiples of 8 are a hard error naming the offending axis.
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let reader = ImageReader::open(path).map_err(|cause| Error::Io {
        path: path.into(),
        cause,
    })?;
    let reader = reader.with_guessed_format().map_err(|cause| Error::Io {
        path: path.into(),
        cause,
    })?;
    match reader.format() {
        Some(image::ImageFormat::Png) | Some(image::ImageFormat::Jpeg) => {}
        _ => return Err(Error::UnsupportedFormat { path: path.into() }),
    }
    let dynamic = reader.decode().map_err(|cause| Error::Decode {
        path: path.into(),
        cause,
    })?;
    let rgb = dynamic.to_rgb8();
    ImageBuffer::new(rgb.width(), rgb.height(), rgb.into_raw())
}

/// Decode a PNG or JPEG file and bilinearly resize it to `side`x`side`.
///
/// This is the explicit preprocessing path for inputs whose dimensions are
/// not multiples of 8; nothing is ever padded implicitly.
pub fn load_image_resized(path: &Path, side: u32) -> Result<ImageBuffer> {
    let reader = ImageReader::open(path).map_err(|cause| Error::Io {
        path: path.into(),
        cause,
    })?;
    let reader = reader.with_guessed_format().map_err(|cause| Error::Io {
        path: path.into(),
        cause,
    })?;
    match reader.format() {
        Some(image::ImageFormat::Png) | Some(image::ImageFormat::Jpeg) => {}
        _ => return Err(Error::UnsupportedFormat { path: path.into() }),
    }
    let dynamic = reader.decode().map_err(|cause| Error::Decode {
        path: path.into(),
        cause,
    })?;
    let rgb = dynamic.to_rgb8();
    let (w, h) = (rgb.width(), rgb.height());
    let src: Vec<f64> = rgb.into_raw().iter().map(|&v| v as f64).collect();
    let out = bilinear_resize(&src, w, h, side, side);
    ImageBuffer::new(side, side, quantize(&out))
}

/// Write an RGB buffer as PNG (lossless) or baseline JPEG.
pub fn save_image(img: &ImageBuffer, path: &Path, format: SaveFormat) -> Result<()> {
    let file = File::create(path).map_err(|cause| Error::Io {
        path: path.into(),
        cause,
    })?;
    let mut writer = BufWriter::new(file);
    match format {
        SaveFormat::Png => {
            let enc = image::codecs::png::PngEncoder::new(&mut writer);
            image::ImageEncoder::write_image(
                enc,
                img.data(),
                img.width(),
                img.height(),
                image::ExtendedColorType::Rgb8,
            )
            .map_err(|cause| Error::Encode {
                path: path.into(),
                cause,
            })?;
        }
        SaveFormat::Jpeg { quality } => {
            let quality = quality.clamp(1, 100);
            let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut writer, quality);
            image::ImageEncoder::write_image(
                enc,
                img.data(),
                img.width(),
                img.height(),
                image::ExtendedColorType::Rgb8,
            )
            .map_err(|cause| Error::Encode {
                path: path.into(),
                cause,
            })?;
        }
    }
    writer.flush().map_err(|cause| Error::Io {
        path: path.into(),
        cause,
    })
}

/// Encode as JPEG in memory and decode again; used by the processing channel.
pub(crate) fn jpeg_cycle(img: &ImageBuffer, quality: u8) -> ImageBuffer {
    let mut bytes = Vec::new();
    let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut bytes, quality.clamp(1, 100));
    image::ImageEncoder::write_image(
        enc,
        img.data(),
        img.width(),
        img.height(),
        image::ExtendedColorType::Rgb8,
    )
    .expect("in-memory JPEG encode cannot fail");
    let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Jpeg)
        .expect("decoding our own JPEG output cannot fail")
        .to_rgb8();
    ImageBuffer::new(decoded.width(), decoded.height(), decoded.into_raw())
        .expect("JPEG cycle preserves dimensions")
}

/// BT.601 luminance, real-valued, not rounded.
pub fn to_luma(img: &ImageBuffer) -> LumaPlane {
    let data = img
        .data
        .chunks_exact(3)
        .map(|px| LUMA_R * px[0] as f64 + LUMA_G * px[1] as f64 + LUMA_B * px[2] as f64)
        .collect();
    LumaPlane {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Re-insert a modified luminance plane by shifting each pixel's channels
/// by the luma delta, clipping to [0,255] and rounding half away from zero.
/// Chrominance is preserved exactly up to that rounding.
pub fn apply_luma(img: &ImageBuffer, new_luma: &LumaPlane) -> Result<ImageBuffer> {
    if img.width != new_luma.width || img.height != new_luma.height {
        return Err(Error::DimensionMismatch {
            expected_width: img.width,
            expected_height: img.height,
            got_width: new_luma.width,
            got_height: new_luma.height,
        });
    }
    let old = to_luma(img);
    let mut data = Vec::with_capacity(img.data.len());
    for (i, px) in img.data.chunks_exact(3).enumerate() {
        let delta = new_luma.data[i] - old.data[i];
        for &v in px {
            data.push(clamp_round(v as f64 + delta));
        }
    }
    Ok(ImageBuffer {
        width: img.width,
        height: img.height,
        data,
    })
}

#[inline]
pub(crate) fn clamp_round(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

/// Quantize an interleaved f64 sample buffer to 8 bits.
pub(crate) fn quantize(samples: &[f64]) -> Vec<u8> {
    samples.iter().map(|&v| clamp_round(v)).collect()
}

/// Bilinear resize of an interleaved 3-channel f64 buffer, centre-aligned,
/// clamped at the borders.
pub(crate) fn bilinear_resize(
    src: &[f64],
    src_w: u32,
    src_h: u32,
    dst_w: u32,
    dst_h: u32,
) -> Vec<f64> {
    let (sw, sh) = (src_w as usize, src_h as usize);
    let mut out = Vec::with_capacity(dst_w as usize * dst_h as usize * 3);
    let x_scale = src_w as f64 / dst_w as f64;
    let y_scale = src_h as f64 / dst_h as f64;
    for dy in 0..dst_h {
        let sy = (dy as f64 + 0.5) * y_scale - 0.5;
        for dx in 0..dst_w {
            let sx = (dx as f64 + 0.5) * x_scale - 0.5;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let xi0 = (x0 as i64).clamp(0, sw as i64 - 1) as usize;
            let xi1 = (x0 as i64 + 1).clamp(0, sw as i64 - 1) as usize;
            let yi0 = (y0 as i64).clamp(0, sh as i64 - 1) as usize;
            let yi1 = (y0 as i64 + 1).clamp(0, sh as i64 - 1) as usize;
            for c in 0..3 {
                let p00 = src[(yi0 * sw + xi0) * 3 + c];
                let p10 = src[(yi0 * sw + xi1) * 3 + c];
                let p01 = src[(yi1 * sw + xi0) * 3 + c];
                let p11 = src[(yi1 * sw + xi1) * 3 + c];
                let top = p00 + (p10 - p00) * fx;
                let bot = p01 + (p11 - p01) * fx;
                out.push(top + (bot - top) * fy);
            }
        }
    }
    out
}

/// Area-averaging downscale of a luma plane to `out_w` x `out_h`; each
/// output sample is the exact mean of its (possibly fractional) source cell.
pub(crate) fn box_downscale(luma: &LumaPlane, out_w: u32, out_h: u32) -> Vec<f64> {
    let sw = luma.width as usize;
    let sh = luma.height as usize;
    let cell_w = luma.width as f64 / out_w as f64;
    let cell_h = luma.height as f64 / out_h as f64;
    let mut out = Vec::with_capacity(out_w as usize * out_h as usize);
    for oy in 0..out_h as usize {
        let y_lo = oy as f64 * cell_h;
        let y_hi = (oy as f64 + 1.0) * cell_h;
        for ox in 0..out_w as usize {
            let x_lo = ox as f64 * cell_w;
            let x_hi = (ox as f64 + 1.0) * cell_w;
            let mut acc = 0.0;
            let mut area = 0.0;
            let mut y = y_lo.floor() as usize;
            while (y as f64) < y_hi && y < sh {
                let wy = overlap(y as f64, y as f64 + 1.0, y_lo, y_hi);
                if wy > 0.0 {
                    let mut x = x_lo.floor() as usize;
                    while (x as f64) < x_hi && x < sw {
                        let wx = overlap(x as f64, x as f64 + 1.0, x_lo, x_hi);
                        if wx > 0.0 {
                            acc += wx * wy * luma.data[y * sw + x];
                            area += wx * wy;
                        }
                        x += 1;
                    }
                }
                y += 1;
            }
            out.push(acc / area);
        }
    }
    out
}

#[inline]
fn overlap(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> f64 {
    (a_hi.min(b_hi) - a_lo.max(b_lo)).max(0.0)
}
