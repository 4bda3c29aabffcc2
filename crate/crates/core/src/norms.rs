//! Modulars and norms: the Luxemburg norm of `L^{p(.)}`, the exponential
//! Orlicz norm (`psi(t) = e^t - 1`), the Marcinkiewicz norm for
//! `phi(t) = t ln(e/t)`, and `sup_t f*(t) / ln(e/t)`.
//!
//! Luxemburg-type norms are found by bisection on `lambda`: the modular is
//! non-increasing in `lambda`, so the bracket `[lo, hi]` is kept with
//! `modular(lo) > 1 >= modular(hi)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ExponentProfile, StepFn};
use crate::profiles::log_e_over;
use crate::rearrangement::decreasing_rearrangement;

/// Default absolute tolerance on `lambda`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Outcome of a Luxemburg-type bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    /// Modular evaluated at `value`.
    #[serde(rename = "modular")]
    pub modular_at_value: f64,
    #[serde(rename = "iters")]
    pub iterations: u32,
}

impl NormResult {
    fn zero() -> Self {
        Self {
            value: 0.0,
            lo: 0.0,
            hi: 0.0,
            modular_at_value: 0.0,
            iterations: 0,
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// `len * (v / lambda)^p`, switching to log space when the power overflows.
/// Returns `+inf` when the term itself is not representable.
#[inline]
pub(crate) fn power_term(len: f64, ratio: f64, p: f64) -> f64 {
    if ratio == 0.0 {
        return 0.0;
    }
    let pw = ratio.powf(p);
    if pw.is_finite() {
        len * pw
    } else {
        (p * ratio.ln() + len.ln()).exp()
    }
}

/// `integral (|f| / lambda)^{p(x)} dx` on the common refinement of `f` and `p`.
pub fn modular(f: &StepFn, p: &ExponentProfile, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(f.zip_cells(p)
        .map(|(a, b, v, e)| power_term(b - a, v / lambda, e))
        .sum())
}

/// Bisection for `inf { lambda > 0 : modular(lambda) <= 1 }`.
///
/// `hi` must satisfy `modular(hi) <= 1`. The lower end is found by halving.
pub fn bisect_unit_level(modular: impl Fn(f64) -> f64, hi: f64, tol: f64) -> NormResult {
    let mut hi = hi;
    let mut lo = hi / 2.0;
    let mut iterations = 0;
    while modular(lo) <= 1.0 {
        hi = lo;
        lo /= 2.0;
        iterations += 1;
        if lo < f64::MIN_POSITIVE {
            return NormResult {
                value: hi,
                lo: 0.0,
                hi,
                modular_at_value: modular(hi),
                iterations,
            };
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if modular(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    NormResult {
        value: hi,
        lo,
        hi,
        modular_at_value: modular(hi),
        iterations,
    }
}

/// Luxemburg norm of `f` in `L^{p(.)}([0, 1])`.
pub fn luxemburg_norm(f: &StepFn, p: &ExponentProfile, tol: f64) -> Result<NormResult> {
    check_tol(tol)?;
    let terms: Vec<(f64, f64, f64)> = f
        .zip_cells(p)
        .filter(|&(_, _, v, _)| v > 0.0)
        .map(|(a, b, v, e)| (b - a, v, e))
        .collect();
    if terms.is_empty() {
        return Ok(NormResult::zero());
    }
    // every ratio v / max <= 1 and exponents are >= 1, so the modular at max <= 1
    let hi = terms.iter().map(|t| t.1).fold(0.0, f64::max);
    Ok(bisect_unit_level(
        |lambda| terms.iter().map(|&(len, v, e)| power_term(len, v / lambda, e)).sum(),
        hi,
        tol,
    ))
}

/// Norm of the indicator of a union of intervals, given as `(length, exponent)`
/// pieces. The modular is `sum len * lambda^{-p}`.
pub fn indicator_norm_from_pieces(pieces: &[(f64, f64)], tol: f64) -> Result<NormResult> {
    check_tol(tol)?;
    if pieces.iter().all(|&(len, _)| len <= 0.0) {
        return Ok(NormResult::zero());
    }
    Ok(bisect_unit_level(
        |lambda| {
            let inv = 1.0 / lambda;
            pieces.iter().map(|&(len, e)| power_term(len, inv, e)).sum()
        },
        1.0,
        tol,
    ))
}

/// `(length, exponent)` pieces of `p` restricted to `[a, b)`.
pub fn pieces_on_interval(p: &StepFn, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
    let x = p.breakpoints();
    let first = x.partition_point(|&bp| bp <= a).saturating_sub(1);
    for i in first..p.cell_count() {
        let lo = x[i].max(a);
        if lo >= b {
            break;
        }
        let hi = x[i + 1].min(b);
        if hi > lo {
            out.push((hi - lo, p.values()[i]));
        }
    }
}

/// Luxemburg norm of the indicator of `[a, b)` against `p`.
pub fn interval_indicator_norm(p: &ExponentProfile, a: f64, b: f64, tol: f64) -> Result<NormResult> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::Domain(format!("bad interval [{a}, {b})")));
    }
    let mut pieces = Vec::new();
    pieces_on_interval(p, a, b, &mut pieces);
    indicator_norm_from_pieces(&pieces, tol)
}

/// Orlicz norm for `psi(t) = e^t - 1`.
pub fn orlicz_exp_norm(f: &StepFn, tol: f64) -> Result<NormResult> {
    check_tol(tol)?;
    let terms: Vec<(f64, f64)> = f
        .cells()
        .filter(|c| c.value > 0.0)
        .map(|c| (c.len(), c.value))
        .collect();
    if terms.is_empty() {
        return Ok(NormResult::zero());
    }
    // psi(v / lambda) <= 1 whenever v / lambda <= ln 2
    let hi = terms.iter().map(|t| t.1).fold(0.0, f64::max) / std::f64::consts::LN_2;
    Ok(bisect_unit_level(
        |lambda| terms.iter().map(|&(len, v)| len * (v / lambda).exp_m1()).sum(),
        hi,
        tol,
    ))
}

/// Marcinkiewicz norm `sup_{0<t<=1} (1 / (t ln(e/t))) integral_0^t f*`.
///
/// On a cell of `f*` the ratio `F(t) / phi(t)` has derivative with the sign of
/// `v t + (F(t_i) - v t_i) ln t`, which is increasing in `t`; any interior
/// critical point is therefore a minimum and the supremum sits at a
/// breakpoint. Near the origin the ratio tends to 0.
pub fn marcinkiewicz_ln_norm(f: &StepFn) -> f64 {
    let fs = decreasing_rearrangement(f);
    let mut cumulative = 0.0;
    let mut best: f64 = 0.0;
    for c in fs.cells() {
        cumulative += c.value * c.len();
        best = best.max(cumulative / (c.end * log_e_over(c.end)));
    }
    best
}

/// `sup_{0<t<=1} f*(t) / ln(e/t)`.
///
/// On each cell the ratio increases with `t`, so its supremum is the limit at
/// the cell's right end.
pub fn sup_log_ratio_norm(f: &StepFn) -> f64 {
    decreasing_rearrangement(f)
        .cells()
        .map(|c| c.value / log_e_over(c.end))
        .fold(0.0, f64::max)
}
