//! Blind DCT-domain stegosystems: quantisation index modulation (QIM) and
//! improved spread spectrum (ISS).
//!
//! Both systems spread each trait bit over a disjoint, key-selected group of
//! mid-band coefficients of the luminance block DCT. The group projection
//! onto a Rademacher carrier yields one scalar per bit; QIM snaps it to one
//! of two dithered quantisation cosets, ISS displaces it so its sign encodes
//! the bit while cancelling a fraction `lambda` of the host value. Decoding
//! needs only the key, never the cover.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{apply_luma, block_dct, block_idct, to_luma, CoeffGrid, ImageBuffer};
use crate::prng::SplitMix64;
use crate::projector::Trait;

/// Zigzag index range (inclusive) of the coefficients eligible for
/// embedding. The default 6..=20 mid-band trades JPEG survival against
/// visibility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Midband {
    pub lo: usize,
    pub hi: usize,
}

impl Default for Midband {
    fn default() -> Self {
        Self { lo: 6, hi: 20 }
    }
}

impl Midband {
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    fn validate(&self) -> Result<()> {
        if self.lo == 0 || self.hi >= 64 || self.hi < self.lo {
            return Err(Error::InvalidParam(format!(
                "midband {}..={} out of range (AC zigzag indices 1..=63)",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// QIM parameters: quantisation step in projection units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QimParams {
    pub delta: f64,
    pub midband: Midband,
}

impl Default for QimParams {
    fn default() -> Self {
        Self {
            delta: 6.0,
            midband: Midband::default(),
        }
    }
}

/// ISS parameters: signal amplitude `alpha` and host-rejection factor
/// `lambda` in [0, 1] (1 = full host cancellation).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssParams {
    pub alpha: f64,
    pub lambda: f64,
    pub midband: Midband,
}

impl Default for IssParams {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            lambda: 1.0,
            midband: Midband::default(),
        }
    }
}

/// Key material shared by encoder and decoder; a pure function of
/// (seed, image dimensions, bit count, midband).
#[derive(Clone, Debug)]
pub struct StegoKey {
    seed: u64,
    width: u32,
    height: u32,
    n: usize,
    group_size: usize,
    /// Per bit: the flat coefficient indices (block * 64 + zigzag position)
    /// assigned to it.
    groups: Vec<Vec<usize>>,
    /// Per bit: one Rademacher (+/-1) carrier entry per group coefficient.
    carriers: Vec<Vec<f64>>,
    /// Per bit: dither as a fraction of the quantisation step, in [0, 1).
    dither_unit: Vec<f64>,
}

impl StegoKey {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bits(&self) -> usize {
        self.n
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn carriers(&self) -> &[Vec<f64>] {
        &self.carriers
    }

    pub fn dither_unit(&self) -> &[f64] {
        &self.dither_unit
    }

    fn check_image(&self, img: &ImageBuffer) -> Result<()> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::DimensionMismatch {
                expected_width: self.width,
                expected_height: self.height,
                got_width: img.width(),
                got_height: img.height(),
            });
        }
        Ok(())
    }
}

/// Expand a 64-bit seed into key material.
///
/// Draw order is pinned for reproducibility: the coefficient pool is
/// enumerated block-major (zigzag index ascending within each block),
/// shuffled by Fisher-Yates, and split into `n` disjoint groups of
/// `pool / n` coefficients (remainder unused); then one carrier entry per
/// group coefficient; then one dither fraction per bit.
pub fn derive_material(
    key_seed: u64,
    width: u32,
    height: u32,
    n: usize,
    midband: Midband,
) -> Result<StegoKey> {
    midband.validate()?;
    if n == 0 {
        return Err(Error::BitCount { n, max: usize::MAX });
    }
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
    let blocks = (width as usize / 8) * (height as usize / 8);
    let pool_size = blocks * midband.len();
    if pool_size < n {
        return Err(Error::Capacity {
            pool: pool_size,
            bits: n,
        });
    }
    let mut pool: Vec<usize> = (0..blocks)
        .flat_map(|b| (midband.lo..=midband.hi).map(move |z| b * 64 + z))
        .collect();
    let mut rng = SplitMix64::new(key_seed);
    rng.shuffle(&mut pool);
    let group_size = pool_size / n;
    let groups: Vec<Vec<usize>> = (0..n)
        .map(|i| pool[i * group_size..(i + 1) * group_size].to_vec())
        .collect();
    let carriers: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..group_size).map(|_| rng.next_sign()).collect())
        .collect();
    const TWO_64: f64 = 18_446_744_073_709_551_616.0;
    let dither_unit: Vec<f64> = (0..n).map(|_| rng.next_u64() as f64 / TWO_64).collect();
    Ok(StegoKey {
        seed: key_seed,
        width,
        height,
        n,
        group_size,
        groups,
        carriers,
        dither_unit,
    })
}

/// Normalised carrier projection of one bit's coefficient group.
#[inline]
fn project_group(coeffs: &[f64], group: &[usize], carrier: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&idx, &u) in group.iter().zip(carrier) {
        acc += coeffs[idx] * u;
    }
    acc / group.len() as f64
}

/// Move the projection to `target` by adding the difference along the
/// carrier; since the carrier has unit-magnitude entries the restored
/// projection equals `target` exactly.
#[inline]
fn retarget_group(coeffs: &mut [f64], group: &[usize], carrier: &[f64], delta: f64) {
    for (&idx, &u) in group.iter().zip(carrier) {
        coeffs[idx] += delta * u;
    }
}

/// Nearest point of the dithered lattice `{step * z + offset}` to `x`.
#[inline]
fn nearest_lattice_point(x: f64, step: f64, offset: f64) -> f64 {
    offset + step * ((x - offset) / step).round()
}

fn check_params_positive(value: f64, name: &str) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::InvalidParam(format!("{name} must be positive")));
    }
    Ok(())
}

fn embed_common(
    img: &ImageBuffer,
    t: &Trait,
    key: &StegoKey,
    mut retarget: impl FnMut(usize, f64, bool) -> f64,
) -> Result<ImageBuffer> {
    key.check_image(img)?;
    if t.len() != key.n {
        return Err(Error::TraitLength {
            left: t.len(),
            right: key.n,
        });
    }
    let luma = to_luma(img);
    let mut grid = block_dct(&luma)?;
    let coeffs = grid.coeffs_mut();
    for i in 0..key.n {
        let group = &key.groups[i];
        let carrier = &key.carriers[i];
        let x = project_group(coeffs, group, carrier);
        let target = retarget(i, x, t.bit(i));
        retarget_group(coeffs, group, carrier, target - x);
    }
    apply_luma(img, &block_idct(&grid))
}

fn extract_projections(img: &ImageBuffer, key: &StegoKey) -> Result<(CoeffGrid, Vec<f64>)> {
    key.check_image(img)?;
    let grid = block_dct(&to_luma(img))?;
    let coeffs = grid.coeffs();
    let projections = (0..key.n)
        .map(|i| project_group(coeffs, &key.groups[i], &key.carriers[i]))
        .collect();
    Ok((grid, projections))
}

/// Embed a trait by snapping each bit's projection to the nearest point of
/// its dithered coset: bit `b` uses the lattice `{delta*z + dither + b*delta/2}`.
pub fn qim_embed(
    img: &ImageBuffer,
    t: &Trait,
    key: &StegoKey,
    params: &QimParams,
) -> Result<ImageBuffer> {
    check_params_positive(params.delta, "delta")?;
    let delta = params.delta;
    embed_common(img, t, key, |i, x, bit| {
        let offset = delta * key.dither_unit[i] + if bit { delta / 2.0 } else { 0.0 };
        nearest_lattice_point(x, delta, offset)
    })
}

/// Blind QIM decoder: each bit is the coset closest to the projection
/// (ties decode to 0).
pub fn qim_extract(img: &ImageBuffer, key: &StegoKey, params: &QimParams) -> Result<Trait> {
    check_params_positive(params.delta, "delta")?;
    let delta = params.delta;
    let (_, projections) = extract_projections(img, key)?;
    let bools: Vec<bool> = projections
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let d0 = (x - nearest_lattice_point(x, delta, delta * key.dither_unit[i])).abs();
            let d1 =
                (x - nearest_lattice_point(x, delta, delta * key.dither_unit[i] + delta / 2.0))
                    .abs();
            d1 < d0
        })
        .collect();
    Trait::from_bools(&bools)
}

/// Embed a trait by linear displacement: with sign `s = 2b - 1` the
/// projection becomes `x + alpha*s - lambda*x`; at `lambda = 1` the host
/// term cancels entirely and the projection equals `alpha*s`.
pub fn iss_embed(
    img: &ImageBuffer,
    t: &Trait,
    key: &StegoKey,
    params: &IssParams,
) -> Result<ImageBuffer> {
    check_params_positive(params.alpha, "alpha")?;
    if !(0.0..=1.0).contains(&params.lambda) {
        return Err(Error::InvalidParam("lambda must lie in [0, 1]".into()));
    }
    let (alpha, lambda) = (params.alpha, params.lambda);
    embed_common(img, t, key, |_i, x, bit| {
        let sign = if bit { 1.0 } else { -1.0 };
        x + (alpha * sign - lambda * x)
    })
}

/// Blind ISS decoder: the bit is the projection's sign (zero decodes to 1).
pub fn iss_extract(img: &ImageBuffer, key: &StegoKey, params: &IssParams) -> Result<Trait> {
    check_params_positive(params.alpha, "alpha")?;
    let (_, projections) = extract_projections(img, key)?;
    let bools: Vec<bool> = projections.iter().map(|&x| x >= 0.0).collect();
    Trait::from_bools(&bools)
}

/// A stegosystem selection with its parameters, as recorded in manifests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum StegoSystem {
    Qim(QimParams),
    Iss(IssParams),
}

impl StegoSystem {
    pub fn method_name(&self) -> &'static str {
        match self {
            StegoSystem::Qim(_) => "qim",
            StegoSystem::Iss(_) => "iss",
        }
    }

    pub fn midband(&self) -> Midband {
        match self {
            StegoSystem::Qim(p) => p.midband,
            StegoSystem::Iss(p) => p.midband,
        }
    }

    pub fn derive(&self, key_seed: u64, width: u32, height: u32, n: usize) -> Result<StegoKey> {
        derive_material(key_seed, width, height, n, self.midband())
    }

    pub fn embed(&self, img: &ImageBuffer, t: &Trait, key: &StegoKey) -> Result<ImageBuffer> {
        match self {
            StegoSystem::Qim(p) => qim_embed(img, t, key, p),
            StegoSystem::Iss(p) => iss_embed(img, t, key, p),
        }
    }

    pub fn extract(&self, img: &ImageBuffer, key: &StegoKey) -> Result<Trait> {
        match self {
            StegoSystem::Qim(p) => qim_extract(img, key, p),
            StegoSystem::Iss(p) => iss_extract(img, key, p),
        }
    }

    /// Derive material for the image's dimensions and extract in one step.
    pub fn extract_with_seed(&self, img: &ImageBuffer, key_seed: u64, n: usize) -> Result<Trait> {
        let key = self.derive(key_seed, img.width(), img.height(), n)?;
        self.extract(img, &key)
    }
}
