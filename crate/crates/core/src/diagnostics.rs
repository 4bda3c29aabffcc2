//! Finite-depth diagnostics for the rearranged exponent: the ratio
//! `p*(t) / ln(e/t)` near the origin, partial integrals of `c^{p*}`, the
//! Marcinkiewicz defect `(1/phi(t)) integral_0^t f*`, and the dyadic cube
//! scan of indicator norms.
//!
//! None of these decide a limit. They return the sampled sequences, and the
//! verdict helpers state plainly that their answers are finite-depth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interleave::{cube_from_image, DyadicRect, GridExponentND};
use crate::measure::{ExponentProfile, StepFn};
use crate::norms::{indicator_norm_from_pieces, pieces_on_interval};
use crate::profiles::log_e_over;
use crate::rearrangement::decreasing_rearrangement;

/// Default threshold applied to the deepest tail maximum of the ratio profile.
pub const DEFAULT_DELTA: f64 = 0.05;

/// Largest `n * m` enumerated by the cube scan.
pub const MAX_SCAN_BITS: u32 = 26;

/// `p*(2^{-j}) / ln(e 2^j)` for `j = 0..=max_depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioProfile {
    pub depths: Vec<u32>,
    pub ratios: Vec<f64>,
    /// `sup` of the ratios over depths `>= j`.
    pub running_max_tail: Vec<f64>,
}

impl RatioProfile {
    /// Tail maximum at the deepest sampled level.
    pub fn tail_max(&self) -> f64 {
        *self.running_max_tail.last().expect("non-empty profile")
    }
}

fn require_non_increasing(p: &StepFn) -> Result<()> {
    if !p.is_non_increasing() {
        return Err(Error::Validation(
            "expected a non-increasing (rearranged) profile".into(),
        ));
    }
    Ok(())
}

/// Value of `p*` at `2^{-j}`; at `t = 1` the left limit is used.
fn value_at_dyadic(p: &StepFn, j: u32) -> f64 {
    if j == 0 {
        p.values()[p.cell_count() - 1]
    } else {
        p.evaluate((-(j as f64)).exp2())
            .expect("dyadic point inside [0, 1)")
    }
}

pub fn limsup_ratio_profile(p_star: &ExponentProfile, max_depth: u32) -> Result<RatioProfile> {
    require_non_increasing(p_star)?;
    if max_depth < 1 {
        return Err(Error::Domain("max_depth must be >= 1".into()));
    }
    let depths: Vec<u32> = (0..=max_depth).collect();
    let ratios: Vec<f64> = depths
        .iter()
        .map(|&j| value_at_dyadic(p_star, j) / (1.0 + j as f64 * std::f64::consts::LN_2))
        .collect();
    let mut running_max_tail = ratios.clone();
    for i in (0..running_max_tail.len() - 1).rev() {
        running_max_tail[i] = running_max_tail[i].max(running_max_tail[i + 1]);
    }
    Ok(RatioProfile {
        depths,
        ratios,
        running_max_tail,
    })
}

/// Partial integrals `integral_{2^{-D}}^1 c^{p*(t)} dt`, kept in log space
/// because `c^{p*}` overflows quickly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialIntegrals {
    pub c: f64,
    pub depths: Vec<u32>,
    pub log_values: Vec<f64>,
}

impl PartialIntegrals {
    /// Values in linear scale; `inf` where they overflow.
    pub fn values(&self) -> Vec<f64> {
        self.log_values.iter().map(|l| l.exp()).collect()
    }

    /// `I(D) / I(D - span)` at the deepest depth, if `D - span` was sampled.
    pub fn growth_ratio(&self, span: u32) -> Option<f64> {
        let last = *self.depths.last()?;
        let from = last.checked_sub(span)?;
        let k = self.depths.iter().position(|&d| d == from)?;
        Some((self.log_values[self.log_values.len() - 1] - self.log_values[k]).exp())
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn exp_integral_test(p_star: &ExponentProfile, c: f64, depths: &[u32]) -> Result<PartialIntegrals> {
    if !(c > 1.0 && c.is_finite()) {
        return Err(Error::Domain(format!("base c must exceed 1, got {c}")));
    }
    require_non_increasing(p_star)?;
    let ln_c = c.ln();
    let n = p_star.cell_count();
    // suffix[i] = ln sum_{k >= i} len_k c^{v_k}
    let mut suffix = vec![f64::NEG_INFINITY; n + 1];
    for i in (0..n).rev() {
        let cell = p_star.cell(i);
        suffix[i] = log_add_exp(suffix[i + 1], cell.value * ln_c + cell.len().ln());
    }
    let log_values = depths
        .iter()
        .map(|&d| {
            let t = (-(d as f64)).exp2();
            if t >= 1.0 {
                return f64::NEG_INFINITY;
            }
            let i = p_star.partition().cell_index(t).expect("t inside [0, 1)");
            let cell = p_star.cell(i);
            let head = cell.value * ln_c + (cell.end - t).ln();
            log_add_exp(head, suffix[i + 1])
        })
        .collect();
    Ok(PartialIntegrals {
        c,
        depths: depths.to_vec(),
        log_values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegralVerdict {
    Divergent,
    Convergent,
    Inconclusive,
}

impl std::fmt::Display for IntegralVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IntegralVerdict::Divergent => "divergent",
            IntegralVerdict::Convergent => "convergent",
            IntegralVerdict::Inconclusive => "inconclusive",
        })
    }
}

/// Three-way finite-depth reading of a partial-integral sequence.
///
/// Over the last quarter of the sampled depths:
/// * growth by a factor `>= 2`, or per-depth contributions that do not decay
///   (geometric-mean ratio `>= 1 - 1e-6`), is read as divergence;
/// * a relative increase `< 1e-6`, or contributions decaying at a per-depth
///   ratio `<= 0.9`, is read as convergence;
/// * anything else is inconclusive.
///
/// Per-depth contributions of `integral c^{p*}` behave like `2^{-j} c^{p*(2^{-j})}`,
/// so a non-decaying contribution is exactly the `1/t`-or-worse regime.
pub fn classify_partial_integrals(pi: &PartialIntegrals) -> IntegralVerdict {
    let n = pi.log_values.len();
    if n < 3 {
        return IntegralVerdict::Inconclusive;
    }
    let q = (n / 4).max(2);
    let first = n - 1 - q;
    let l = &pi.log_values;
    let growth = (l[n - 1] - l[first]).exp();
    if growth >= 2.0 {
        return IntegralVerdict::Divergent;
    }
    if 1.0 - 1.0 / growth < 1e-6 {
        return IntegralVerdict::Convergent;
    }
    // mean contribution per unit depth between consecutive samples, in logs
    let contribution = |k: usize| {
        let step = (pi.depths[k] - pi.depths[k - 1]).max(1) as f64;
        l[k] + (-(l[k - 1] - l[k]).exp()).ln_1p() - step.ln()
    };
    let (c0, c1) = (contribution(first + 1), contribution(n - 1));
    let span = (pi.depths[n - 1] - pi.depths[first + 1]).max(1) as f64;
    let ratio = if c0 == f64::NEG_INFINITY {
        if c1 == f64::NEG_INFINITY {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((c1 - c0) / span).exp()
    };
    if ratio >= 1.0 - 1e-6 {
        IntegralVerdict::Divergent
    } else if ratio <= 0.9 {
        IntegralVerdict::Convergent
    } else {
        IntegralVerdict::Inconclusive
    }
}

/// `(1 / (t ln(e/t))) integral_0^t f*(u) du` at `t = 2^{-j}`.
pub fn mln_defect(f: &StepFn, depths: &[u32]) -> Vec<f64> {
    let fs = decreasing_rearrangement(f);
    depths
        .iter()
        .map(|&j| {
            let t = (-(j as f64)).exp2();
            fs.integrate_map_over(0.0, t, |v| v) / (t * log_e_over(t))
        })
        .collect()
}

/// Minimum indicator norm over all dyadic cubes at each level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub dim: usize,
    pub levels: Vec<u32>,
    pub min_norms: Vec<f64>,
    pub argmin_cubes: Vec<DyadicRect>,
    /// Requested maximum level when it had to be clamped.
    pub clamped_from: Option<u32>,
    /// Deepest level whose cubes are all guaranteed a construction window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_level: Option<u32>,
}

impl ScanReport {
    /// Whether level `m` lies beyond the construction depth.
    pub fn beyond_construction_depth(&self, m: u32) -> bool {
        self.witness_level.is_some_and(|w| m > w)
    }
}

/// Largest level the scan will enumerate for `pbar`.
pub fn max_scan_level(pbar: &GridExponentND) -> u32 {
    pbar.bits().min(MAX_SCAN_BITS / pbar.dim() as u32)
}

/// For each level `m`, the minimum of `||chi_Q||` over all `2^{n m}` cubes of
/// side `2^{-m}`. The cubes' images are exactly the level-`n m` dyadic
/// intervals, so the scan runs over those intervals in parallel; ties go to
/// the smallest image index.
pub fn closedness_scan(pbar: &GridExponentND, max_level: u32, tol: f64) -> Result<ScanReport> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let cap = max_scan_level(pbar);
    let top = max_level.min(cap);
    let p = pbar.p_hat();
    let n = pbar.dim();
    let mut report = ScanReport {
        dim: n,
        levels: Vec::new(),
        min_norms: Vec::new(),
        argmin_cubes: Vec::new(),
        clamped_from: (top < max_level).then_some(max_level),
        witness_level: None,
    };
    for m in 0..=top {
        let bits = n as u32 * m;
        let count = 1u64 << bits;
        let scale = (-(bits as f64)).exp2();
        let (best, idx) = (0..count)
            .into_par_iter()
            .map_init(Vec::new, |pieces, k| {
                pieces.clear();
                pieces_on_interval(p, k as f64 * scale, (k + 1) as f64 * scale, pieces);
                let r = indicator_norm_from_pieces(pieces, tol).expect("positive tolerance");
                (r.value, k)
            })
            .reduce(
                || (f64::INFINITY, u64::MAX),
                |a, b| match a.0.total_cmp(&b.0) {
                    std::cmp::Ordering::Less => a,
                    std::cmp::Ordering::Greater => b,
                    std::cmp::Ordering::Equal => {
                        if a.1 <= b.1 {
                            a
                        } else {
                            b
                        }
                    }
                },
            );
        report.levels.push(m);
        report.min_norms.push(best);
        report.argmin_cubes.push(cube_from_image(n, m, idx));
    }
    Ok(report)
}
