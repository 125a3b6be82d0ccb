//! Orthonormal 8x8 block DCT-II with zigzag coefficient layout.

use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::imaging::LumaPlane;

/// Standard JPEG zigzag scan: `ZIGZAG[k]` is the raster index (row*8+col)
/// of the k-th coefficient in zigzag order.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20,
    13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59,
    52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

/// Orthonormal N-point DCT-II basis matrix: `m[u][x] = c(u) cos((2x+1)u pi / 2N)`
/// with `c(0) = sqrt(1/N)` and `c(u>0) = sqrt(2/N)`.
pub(crate) fn dct_matrix(n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for (u, row) in m.iter_mut().enumerate() {
        let c = if u == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for (x, entry) in row.iter_mut().enumerate() {
            *entry = c
                * ((2.0 * x as f64 + 1.0) * u as f64 * std::f64::consts::PI / (2.0 * n as f64))
                    .cos();
        }
    }
    m
}

static DCT8: LazyLock<Vec<Vec<f64>>> = LazyLock::new(|| dct_matrix(8));

/// Per-block DCT coefficients, block-major with zigzag order inside each
/// block: coefficient `k` of block `b` lives at `coeffs[b * 64 + k]`.
#[derive(Clone, Debug)]
pub struct CoeffGrid {
    block_rows: u32,
    block_cols: u32,
    coeffs: Vec<f64>,
}

impl CoeffGrid {
    pub fn block_rows(&self) -> u32 {
        self.block_rows
    }

    pub fn block_cols(&self) -> u32 {
        self.block_cols
    }

    pub fn blocks(&self) -> usize {
        self.block_rows as usize * self.block_cols as usize
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }
}

/// Forward orthonormal 2-D DCT-II over each 8x8 block.
pub fn block_dct(luma: &LumaPlane) -> Result<CoeffGrid> {
    let (w, h) = (luma.width(), luma.height());
    if w == 0 || !w.is_multiple_of(8) {
        return Err(Error::Dimension {
            axis: "width",
            size: w,
        });
    }
    if h == 0 || !h.is_multiple_of(8) {
        return Err(Error::Dimension {
            axis: "height",
            size: h,
        });
    }
    let block_cols = w / 8;
    let block_rows = h / 8;
    let mut coeffs = vec![0.0; (block_rows * block_cols) as usize * 64];
    let m = &*DCT8;
    let stride = w as usize;
    let data = luma.data();
    let mut block = [[0.0f64; 8]; 8];
    for br in 0..block_rows as usize {
        for bc in 0..block_cols as usize {
            for (r, row) in block.iter_mut().enumerate() {
                let base = (br * 8 + r) * stride + bc * 8;
                row.copy_from_slice(&data[base..base + 8]);
            }
            let spectrum = transform(&block, m, false);
            let out = &mut coeffs[(br * block_cols as usize + bc) * 64..][..64];
            for (k, &raster) in ZIGZAG.iter().enumerate() {
                out[k] = spectrum[raster / 8][raster % 8];
            }
        }
    }
    Ok(CoeffGrid {
        block_rows,
        block_cols,
        coeffs,
    })
}

/// Inverse of [`block_dct`].
pub fn block_idct(grid: &CoeffGrid) -> LumaPlane {
    let w = grid.block_cols * 8;
    let h = grid.block_rows * 8;
    let stride = w as usize;
    let mut data = vec![0.0f64; (w * h) as usize];
    let m = &*DCT8;
    let mut spectrum = [[0.0f64; 8]; 8];
    for br in 0..grid.block_rows as usize {
        for bc in 0..grid.block_cols as usize {
            let coeffs = &grid.coeffs[(br * grid.block_cols as usize + bc) * 64..][..64];
            for (k, &raster) in ZIGZAG.iter().enumerate() {
                spectrum[raster / 8][raster % 8] = coeffs[k];
            }
            let block = transform(&spectrum, m, true);
            for (r, row) in block.iter().enumerate() {
                let base = (br * 8 + r) * stride + bc * 8;
                data[base..base + 8].copy_from_slice(&row[..]);
            }
        }
    }
    LumaPlane::new(w, h, data).expect("grid dimensions are consistent")
}

/// Separable transform: `M B M^T` for the forward direction, `M^T Y M` for
/// the inverse (M is orthonormal).
fn transform(input: &[[f64; 8]; 8], m: &[Vec<f64>], inverse: bool) -> [[f64; 8]; 8] {
    let mut tmp = [[0.0f64; 8]; 8];
    // rows: tmp = input * M^T (forward) or input * M (inverse)
    for r in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += input[r][x] * if inverse { m[x][u] } else { m[u][x] };
            }
            tmp[r][u] = acc;
        }
    }
    let mut out = [[0.0f64; 8]; 8];
    for u in 0..8 {
        for c in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += tmp[x][c] * if inverse { m[x][u] } else { m[u][x] };
            }
            out[u][c] = acc;
        }
    }
    out
}
