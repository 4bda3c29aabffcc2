//! Binary digit interleaving `rho: [0,1)^n -> [0,1)` and the multivariate
//! exponent `p_bar = p_hat o rho`.
//!
//! `rho(x) = 0.a_11 a_21 ... a_n1 a_12 a_22 ... a_n2 ...` where `x_i = 0.a_i1 a_i2 ...`.
//! A level-`m` dyadic cube maps onto a level-`n*m` dyadic interval of the
//! same measure, which reduces every rectangle norm to a one-dimensional
//! computation; `p_bar` is never materialized on an `n`-D grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::ExponentProfile;
use crate::norms::{indicator_norm_from_pieces, pieces_on_interval, NormResult};

/// Digits of an exactly representable image point.
pub const MANTISSA_BITS: u32 = 52;

/// Interleave the low `digits` bits of each coordinate index, most
/// significant first, coordinate-major within each digit position.
pub fn interleave_digits(indices: &[u64], digits: u32) -> u64 {
    let mut z = 0u64;
    for j in (0..digits).rev() {
        for &k in indices {
            z = (z << 1) | ((k >> j) & 1);
        }
    }
    z
}

/// Inverse of [`interleave_digits`].
pub fn deinterleave_digits(z: u64, dim: usize, digits: u32) -> Vec<u64> {
    let mut out = vec![0u64; dim];
    let total = dim as u32 * digits;
    for pos in 0..total {
        let bit = (z >> (total - 1 - pos)) & 1;
        let axis = (pos as usize) % dim;
        out[axis] = (out[axis] << 1) | bit;
    }
    out
}

fn check_budget(dim: usize, bits: u32) -> Result<()> {
    if dim == 0 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    if dim as u64 * bits as u64 > MANTISSA_BITS as u64 {
        return Err(Error::BitBudget {
            level: bits,
            budget: MANTISSA_BITS / dim as u32,
        });
    }
    Ok(())
}

/// `rho(x)` computed from `bits` binary digits per coordinate, truncated.
pub fn interleave_point(x: &[f64], bits: u32) -> Result<f64> {
    check_budget(x.len(), bits)?;
    let scale = (bits as f64).exp2();
    let mut digits = Vec::with_capacity(x.len());
    for &xi in x {
        if !(0.0..1.0).contains(&xi) {
            return Err(Error::Domain(format!("coordinate {xi} outside [0, 1)")));
        }
        digits.push((xi * scale).floor() as u64);
    }
    let z = interleave_digits(&digits, bits);
    Ok(z as f64 / ((x.len() as u32 * bits) as f64).exp2())
}

/// Dyadic interval `[index 2^{-level}, (index + 1) 2^{-level})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub level: u32,
    pub index: u64,
}

impl DyadicInterval {
    pub fn start(&self) -> f64 {
        self.index as f64 / (self.level as f64).exp2()
    }

    pub fn end(&self) -> f64 {
        (self.index + 1) as f64 / (self.level as f64).exp2()
    }

    pub fn len(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start() <= t && t < self.end()
    }
}

#[derive(Serialize, Deserialize)]
struct RawRect {
    levels: Vec<u32>,
    indices: Vec<u64>,
}

/// Axis-aligned dyadic rectangle `prod_i [k_i 2^{-m_i}, (k_i + 1) 2^{-m_i})`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRect", into = "RawRect")]
pub struct DyadicRect {
    levels: Vec<u32>,
    indices: Vec<u64>,
}

impl TryFrom<RawRect> for DyadicRect {
    type Error = Error;

    fn try_from(r: RawRect) -> Result<Self> {
        DyadicRect::new(r.levels, r.indices)
    }
}

impl From<DyadicRect> for RawRect {
    fn from(r: DyadicRect) -> Self {
        RawRect {
            levels: r.levels,
            indices: r.indices,
        }
    }
}

impl DyadicRect {
    pub fn new(levels: Vec<u32>, indices: Vec<u64>) -> Result<Self> {
        if levels.is_empty() || levels.len() != indices.len() {
            return Err(Error::Validation(format!(
                "rectangle needs matching non-empty levels and indices, got {} and {}",
                levels.len(),
                indices.len()
            )));
        }
        for (&m, &k) in levels.iter().zip(&indices) {
            if m > 63 || k >= (1u64 << m) {
                return Err(Error::Validation(format!(
                    "index {k} out of range for level {m}"
                )));
            }
        }
        Ok(Self { levels, indices })
    }

    pub fn cube(dim: usize, level: u32, indices: Vec<u64>) -> Result<Self> {
        if indices.len() != dim {
            return Err(Error::Validation(format!(
                "{} indices for dimension {dim}",
                indices.len()
            )));
        }
        Self::new(vec![level; dim], indices)
    }

    /// The whole cube `[0, 1)^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            levels: vec![0; dim],
            indices: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn max_level(&self) -> u32 {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    pub fn measure(&self) -> f64 {
        (-(self.levels.iter().map(|&m| m as f64).sum::<f64>())).exp2()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self.levels.iter().zip(&self.indices).zip(x).all(|((&m, &k), &xi)| {
                let s = (m as f64).exp2();
                k as f64 <= xi * s && xi * s < (k + 1) as f64
            })
    }

    /// Whether `self` lies inside `other`.
    pub fn is_within(&self, other: &DyadicRect) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| {
                let (m, k) = (self.levels[i], self.indices[i]);
                let (mo, ko) = (other.levels[i], other.indices[i]);
                m >= mo && (k >> (m - mo)) == ko
            })
    }
}

/// `rho(Q)` for a cube `Q` of equal per-axis level `m`: the level-`n*m`
/// interval whose digits interleave the axes' index digits.
pub fn cube_image(q: &DyadicRect) -> Result<DyadicInterval> {
    let m = q.levels[0];
    if q.levels.iter().any(|&l| l != m) {
        return Err(Error::DecomposeFirst(q.levels.clone()));
    }
    let level = q.dim() as u32 * m;
    if level > 63 {
        return Err(Error::BitBudget {
            level: m,
            budget: 63 / q.dim() as u32,
        });
    }
    Ok(DyadicInterval {
        level,
        index: interleave_digits(&q.indices, m),
    })
}

/// The cube of level `m` whose image is the level-`dim*m` interval `index`.
pub fn cube_from_image(dim: usize, m: u32, index: u64) -> DyadicRect {
    DyadicRect {
        levels: vec![m; dim],
        indices: deinterleave_digits(index, dim, m),
    }
}

/// Split `r` into the `2^{sum (m_max - m_i)}` cubes of level `m_max` tiling it,
/// in lexicographic index order.
pub fn decompose_to_cubes(r: &DyadicRect) -> Vec<DyadicRect> {
    let m = r.max_level();
    let ranges: Vec<(u64, u64)> = r
        .levels
        .iter()
        .zip(&r.indices)
        .map(|(&mi, &k)| {
            let shift = m - mi;
            (k << shift, 1u64 << shift)
        })
        .collect();
    let mut out = Vec::new();
    let mut cur: Vec<u64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(DyadicRect {
            levels: vec![m; r.dim()],
            indices: cur.clone(),
        });
        // odometer increment, last axis fastest
        let mut axis = r.dim();
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            let (base, count) = ranges[axis];
            cur[axis] += 1;
            if cur[axis] < base + count {
                break;
            }
            cur[axis] = base;
        }
    }
}

/// `p_bar(x) = p_hat(rho(x))` with `bits` digits per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridExponentND {
    dim: usize,
    p_hat: ExponentProfile,
    bits: u32,
}

impl GridExponentND {
    /// `bits` defaults to `floor(52 / dim)`.
    pub fn new(dim: usize, p_hat: ExponentProfile, bits: Option<u32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be >= 1".into()));
        }
        let bits = bits.unwrap_or(MANTISSA_BITS / dim as u32);
        check_budget(dim, bits)?;
        Ok(Self { dim, p_hat, bits })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn p_hat(&self) -> &ExponentProfile {
        &self.p_hat
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!(
                "point of dimension {} for a {}-dimensional exponent",
                x.len(),
                self.dim
            )));
        }
        self.p_hat.evaluate(interleave_point(x, self.bits)?)
    }

    /// Sorted, merged image intervals of a rectangle.
    pub fn image_intervals(&self, r: &DyadicRect) -> Result<Vec<(f64, f64)>> {
        if r.dim() != self.dim {
            return Err(Error::Domain(format!(
                "rectangle of dimension {} for a {}-dimensional exponent",
                r.dim(),
                self.dim
            )));
        }
        if r.max_level() > self.bits {
            return Err(Error::BitBudget {
                level: r.max_level(),
                budget: self.bits,
            });
        }
        let mut images: Vec<DyadicInterval> = decompose_to_cubes(r)
            .iter()
            .map(cube_image)
            .collect::<Result<_>>()?;
        images.sort_by_key(|i| i.index);
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(images.len());
        for i in images {
            let (a, b) = (i.start(), i.end());
            match merged.last_mut() {
                Some(last) if last.1 == a => last.1 = b,
                _ => merged.push((a, b)),
            }
        }
        Ok(merged)
    }
}

/// `||chi_R||` in `L^{p_bar}` via the measure-preserving reduction to the
/// image intervals of the cubes tiling `R`.
pub fn rect_norm(pbar: &GridExponentND, r: &DyadicRect, tol: f64) -> Result<NormResult> {
    let mut pieces = Vec::new();
    for (a, b) in pbar.image_intervals(r)? {
        pieces_on_interval(pbar.p_hat(), a, b, &mut pieces);
    }
    indicator_norm_from_pieces(&pieces, tol)
}
