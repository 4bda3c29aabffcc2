//! The sufficiency construction: from a rearranged exponent `p*` whose ratio
//! to `ln(e/t)` stays away from zero near the origin, build a scrambled
//! exponent `q` equimeasurable with a minorant of `p*`, and lift it to an
//! exponent `p_hat` equimeasurable with `p*` that dominates `q`.
//!
//! Pipeline: `h = min(p*, ln(e/t))`, anchors `t_k`, the minorant `f`, a
//! divergence certificate for `c^h`, the unit partition `a_k`, the overwrite
//! recursion `p_k`, then `omega` and `p_hat`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::limsup_ratio_profile;
use crate::error::{Error, Result};
use crate::measure::{ExponentProfile, StepBuilder, StepFn};
use crate::profiles::{log_e_over, GeometricGrid};
use crate::rearrangement::{
    decreasing_rearrangement, distribution_excess, equimeasurable, pull_back, sorting_transport,
    TransportMap,
};

/// Tolerance used where an identity is exact in real arithmetic but the
/// two sides are assembled from different floating sums.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Allowed deviation of a band integral from 1 in the audit.
pub const UNIT_BAND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionConfig {
    /// Dimension of the target exponent `p_bar = p_hat o rho`.
    pub dim: usize,
    /// Grid carrying the `ln(e/t)` minorant.
    pub grid: GeometricGrid,
    /// Depth of the ratio profile used to choose `d`.
    pub ratio_depth: u32,
    pub d: Option<f64>,
    pub c: Option<f64>,
    pub max_anchors: usize,
    pub max_stages: usize,
    /// Keep every stage function `p_k` in the trace.
    pub retain_stages: bool,
    /// Sample points for the pointwise `q <= p_hat` check.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        let grid = GeometricGrid::default();
        Self {
            dim: 2,
            grid,
            ratio_depth: grid.depth,
            d: None,
            c: None,
            max_anchors: 64,
            max_stages: 64,
            retain_stages: false,
            samples: 10_000,
            seed: 0,
        }
    }
}

/// `h = min(p*, ln(e/t))` with `ln(e/t)` sampled at right endpoints of the grid.
pub fn clip_exponent(p_star: &ExponentProfile, grid: GeometricGrid) -> Result<ExponentProfile> {
    let ln = grid.sample_right(log_e_over)?;
    ExponentProfile::new(p_star.pointwise_min(&ln))
}

/// An anchor `t` with its ratio certificate. `h_left` is the left limit
/// `h(t - 0)`, the infimum of `h` on every cell ending at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub t: f64,
    pub h_left: f64,
    pub ratio: f64,
}

/// Greedy anchors: the largest grid point whose left-limit ratio reaches
/// `d`, then repeatedly the largest grid point below half the previous one
/// that does.
pub fn select_anchors(h: &ExponentProfile, d: f64, max_anchors: usize) -> Result<Vec<Anchor>> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("d must be positive, got {d}")));
    }
    if max_anchors == 0 {
        return Err(Error::Domain("max_anchors must be >= 1".into()));
    }
    if !h.is_non_increasing() {
        return Err(Error::Validation("h must be non-increasing".into()));
    }
    let x = h.breakpoints();
    let v = h.values();
    let mut anchors: Vec<Anchor> = Vec::new();
    for i in (1..x.len()).rev() {
        if anchors.len() == max_anchors {
            break;
        }
        let t = x[i];
        if let Some(prev) = anchors.last() {
            if !(2.0 * t < prev.t) {
                continue;
            }
        }
        let ratio = v[i - 1] / log_e_over(t);
        if ratio >= d {
            anchors.push(Anchor {
                t,
                h_left: v[i - 1],
                ratio,
            });
        }
    }
    if anchors.is_empty() {
        return Err(Error::NotWitnessed(format!(
            "no grid point has h(t-)/ln(e/t) >= {d}"
        )));
    }
    Ok(anchors)
}

/// `f = d ln(e/t_k)` on `[t_{k+1}, t_k)`, with `t_{K+1} = 0`, and `f = 1`
/// on `[t_1, 1)`.
pub fn build_minorant(anchors: &[f64], d: f64) -> Result<StepFn> {
    if anchors.is_empty() {
        return Err(Error::Domain("no anchors".into()));
    }
    if anchors.windows(2).any(|w| !(w[1] < w[0])) || anchors[0] > 1.0 || anchors[anchors.len() - 1] <= 0.0 {
        return Err(Error::Domain("anchors must decrease strictly inside (0, 1]".into()));
    }
    let mut b = StepBuilder::new();
    b.push(0.0, d * log_e_over(anchors[anchors.len() - 1]));
    for k in (1..anchors.len()).rev() {
        b.push(anchors[k], d * log_e_over(anchors[k - 1]));
    }
    b.push(anchors[0], 1.0);
    b.finish()
}

/// `ln integral_a^b c^h`, summed in log space.
pub fn log_integral_exp(h: &StepFn, ln_c: f64, a: f64, b: f64) -> f64 {
    let terms: Vec<f64> = h
        .cells()
        .filter_map(|cell| {
            let (lo, hi) = (cell.start.max(a), cell.end.min(b));
            (hi > lo).then(|| (hi - lo).ln() + cell.value * ln_c)
        })
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// Lower bound on the band integral below one anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandBound {
    pub t: f64,
    pub next: f64,
    /// `ln((t - next) c^{d ln(e/t)})`.
    pub log_bound: f64,
    /// `ln((t/2) (e/t)^{d ln c})`, the growing chain below `log_bound`.
    pub log_chain: f64,
    /// `ln integral_next^t c^h`, computed on the grid.
    pub log_band_integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCertificate {
    pub bounds: Vec<BandBound>,
    /// The chain increases strictly across the recorded anchors.
    pub grows: bool,
}

pub fn verify_divergence(h: &ExponentProfile, anchors: &[f64], d: f64, c: f64) -> Result<DivergenceCertificate> {
    let threshold = (1.0 / d).exp();
    if !(c > threshold) {
        return Err(Error::BaseTooSmall { c, threshold });
    }
    let ln_c = c.ln();
    let mut bounds = Vec::with_capacity(anchors.len());
    for (k, &t) in anchors.iter().enumerate() {
        let next = anchors.get(k + 1).copied().unwrap_or(0.0);
        let expo = d * ln_c * log_e_over(t);
        let bound = BandBound {
            t,
            next,
            log_bound: (t - next).ln() + expo,
            log_chain: (t / 2.0).ln() + expo,
            log_band_integral: log_integral_exp(h, ln_c, next, t),
        };
        let slack = EXACT_TOLERANCE * bound.log_band_integral.abs().max(1.0);
        if bound.log_bound > bound.log_band_integral + slack {
            return Err(Error::Invariant(format!(
                "band below anchor {t}: bound {} exceeds integral {}",
                bound.log_bound, bound.log_band_integral
            )));
        }
        bounds.push(bound);
    }
    let grows = bounds.windows(2).all(|w| w[1].log_chain > w[0].log_chain);
    if !grows {
        return Err(Error::Invariant("divergence chain does not grow".into()));
    }
    Ok(DivergenceCertificate { bounds, grows })
}

/// Endpoints `1 = a_1 > a_2 > ... > a_{K+1}` with `integral_{a_{k+1}}^{a_k}
/// c^h = 1`, found by inverting the cumulative integral from the right.
/// `K = min(max_stages, floor(total mass))`; the walk stops early if a band
/// falls below floating resolution.
pub fn build_unit_partition(h: &ExponentProfile, c: f64, max_stages: usize) -> Result<Vec<f64>> {
    if !(c > 1.0 && c.is_finite()) {
        return Err(Error::Domain(format!("base must exceed 1, got {c}")));
    }
    let ln_c = c.ln();
    let log_total = log_integral_exp(h, ln_c, 0.0, 1.0);
    let total = log_total.exp();
    if !(total >= 1.0) {
        return Err(Error::GridTooShallow { total });
    }
    let stages = (max_stages as f64).min(total.floor()) as usize;
    let x = h.breakpoints();
    let v = h.values();
    let mut a = vec![1.0];
    let mut pos = 1.0;
    let mut i = v.len() - 1;
    'stages: for _ in 0..stages {
        let mut remaining = 1.0;
        loop {
            let density = (v[i] * ln_c).exp();
            if !density.is_finite() {
                return Err(Error::Domain(format!(
                    "c^h overflows at value {} near t = {pos}",
                    v[i]
                )));
            }
            let avail = (pos - x[i]) * density;
            if avail >= remaining {
                pos = (pos - remaining / density).max(x[i]);
                break;
            }
            remaining -= avail;
            pos = x[i];
            if i == 0 {
                // total mass rounding; the last band would be short
                break 'stages;
            }
            i -= 1;
        }
        if pos >= *a.last().unwrap() {
            break;
        }
        a.push(pos);
    }
    if a.len() < 2 {
        return Err(Error::GridTooShallow { total });
    }
    Ok(a)
}

/// `0, 1/2, 1/4, 3/4, 1/8, 3/8, 5/8, 7/8, ...`
pub fn dyadic_placements(count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(0.0);
    }
    let mut level = 1;
    while out.len() < count {
        let scale = (-(level as f64)).exp2();
        let mut odd = 1u64;
        while odd < (1u64 << level) && out.len() < count {
            out.push(odd as f64 * scale);
            odd += 2;
        }
        level += 1;
    }
    out
}

/// Window `A_k = [r_k, r_k + a_k - a_{k+1})` receiving the band
/// `[a_{k+1}, a_k)` of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageWindow {
    pub stage: usize,
    pub band: [f64; 2],
    pub start: f64,
    /// Unclipped end.
    pub end: f64,
    /// The window extends past 1 and was cut there.
    pub clipped: bool,
}

/// Per-stage quantities checked by the audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageCheck {
    pub stage: usize,
    /// `p_{k-1} <= p_k` on every cell of the common refinement.
    pub monotone: bool,
    pub mass: f64,
    /// Integral of `p_k` over the union of windows placed so far.
    pub covered_mass: f64,
    pub uncovered_measure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scrambled {
    pub q: ExponentProfile,
    pub windows: Vec<StageWindow>,
    pub checks: Vec<StageCheck>,
    /// `p_1, ..., p_K` when requested.
    pub stages: Option<Vec<ExponentProfile>>,
}

/// Replace `base` on `[r, min(e, 1))` by `segment`, given as cell starts
/// (the first equal to `r`) and values.
fn splice(base: &StepFn, r: f64, e: f64, segment: &[(f64, f64)]) -> Result<StepFn> {
    let mut b = StepBuilder::new();
    for cell in base.cells().take_while(|c| c.start < r) {
        b.push(cell.start, cell.value);
    }
    for &(s, v) in segment {
        if s < e {
            b.push(s, v);
        }
    }
    if e < 1.0 {
        b.push(e, base.evaluate(e)?);
        for cell in base.cells().filter(|c| c.start > e) {
            b.push(cell.start, cell.value);
        }
    }
    b.finish()
}

/// Runs the overwrite recursion: at stage `k` the band `[a_{k+1}, a_k)` of
/// `h` is translated to start at `r_k` and replaces the previous values on
/// that window, clipped at 1. Points outside every window keep the floor 1.
pub fn assemble_scrambled_exponent(
    h: &ExponentProfile,
    partition_a: &[f64],
    placements: &[f64],
    retain_stages: bool,
) -> Result<Scrambled> {
    let stages = partition_a.len().saturating_sub(1);
    if stages == 0 {
        return Err(Error::Domain("partition needs at least two endpoints".into()));
    }
    if placements.len() < stages {
        return Err(Error::Domain(format!(
            "{} placements for {stages} stages",
            placements.len()
        )));
    }
    if let Some(r) = placements.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(Error::Domain(format!("placement {r} outside [0, 1)")));
    }
    let x = h.breakpoints();
    let v = h.values();
    let mut p = StepFn::constant(1.0)?;
    let mut covered = StepFn::constant(0.0)?;
    let mut windows = Vec::with_capacity(stages);
    let mut checks = Vec::with_capacity(stages);
    let mut kept = retain_stages.then(Vec::new);
    let mut segment = Vec::new();
    for k in 0..stages {
        let (hi, lo) = (partition_a[k], partition_a[k + 1]);
        let r = placements[k];
        let end = r + (hi - lo);
        let e = end.min(1.0);
        segment.clear();
        let first = x.partition_point(|&bp| bp <= lo) - 1;
        for i in first..v.len() {
            if x[i] >= hi {
                break;
            }
            segment.push((r + (x[i].max(lo) - lo), v[i]));
        }
        let next = splice(&p, r, e, &segment)?;
        covered = splice(&covered, r, e, &[(r, 1.0)])?;
        let monotone = p.zip_cells(&next).all(|(_, _, a, b)| a <= b);
        let covered_mass = next
            .zip_cells(&covered)
            .map(|(s, t, a, w)| a * w * (t - s))
            .sum();
        checks.push(StageCheck {
            stage: k + 1,
            monotone,
            mass: next.integrate(),
            covered_mass,
            uncovered_measure: 1.0 - covered.integrate(),
        });
        windows.push(StageWindow {
            stage: k + 1,
            band: [lo, hi],
            start: r,
            end,
            clipped: end > 1.0,
        });
        p = next;
        if let Some(kept) = kept.as_mut() {
            kept.push(ExponentProfile::new(p.clone())?);
        }
    }
    Ok(Scrambled {
        q: ExponentProfile::new(p)?,
        windows,
        checks,
        stages: kept,
    })
}

/// `omega = sorting_transport(q)` and `p_hat = p* o omega`.
///
/// Requires `q* <= p*`, checked through the distribution functions; the
/// pointwise consequence `q <= p_hat` is then checked at the sample points.
pub fn lift_exponent(
    p_star: &ExponentProfile,
    q: &ExponentProfile,
    samples: &[f64],
) -> Result<(TransportMap, ExponentProfile)> {
    let excess = distribution_excess(q, p_star);
    if excess > EXACT_TOLERANCE {
        return Err(Error::Invariant(format!(
            "q* <= p* fails: |{{q > l}}| exceeds |{{p* > l}}| by {excess}"
        )));
    }
    let omega = sorting_transport(q);
    let p_hat = ExponentProfile::new(pull_back(p_star, &omega)?)?;
    if let Some(&t) = samples
        .iter()
        .find(|&&t| q.evaluate(t).unwrap() > p_hat.evaluate(t).unwrap())
    {
        return Err(Error::Invariant(format!(
            "q({t}) = {} exceeds p_hat({t}) = {}",
            q.evaluate(t).unwrap(),
            p_hat.evaluate(t).unwrap()
        )));
    }
    Ok((omega, p_hat))
}

/// Deterministic well-spread points of `[0, 1)`: an additive recurrence
/// with the golden ratio, offset by the seed. Breakpoints of `avoid` are
/// skipped.
pub fn sample_points(count: usize, seed: u64, avoid: &[&StepFn]) -> Vec<f64> {
    const STEP: f64 = 0.618_033_988_749_894_9;
    let offset = (seed as f64 * 0.754_877_666_246_692_7).fract();
    let mut out = Vec::with_capacity(count);
    let mut i = 0u64;
    while out.len() < count {
        let t = (offset + i as f64 * STEP).fract();
        i += 1;
        let on_breakpoint = avoid
            .iter()
            .any(|f| f.breakpoints().binary_search_by(|b| b.total_cmp(&t)).is_ok());
        if !on_breakpoint {
            out.push(t);
        }
    }
    out
}

/// Deepest `L` such that every level-`L` dyadic interval contains a whole
/// unclipped window.
pub fn coverage_level(windows: &[StageWindow]) -> Option<u32> {
    let mut best = None;
    for level in 0..=52u32 {
        if (1usize << level) > windows.len() {
            break;
        }
        let scale = (-(level as f64)).exp2();
        let all = (0..1u64 << level).all(|j| {
            let (lo, hi) = (j as f64 * scale, (j + 1) as f64 * scale);
            windows
                .iter()
                .any(|w| !w.clipped && w.start >= lo && w.end <= hi)
        });
        if !all {
            break;
        }
        best = Some(level);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionTrace {
    pub config: ConstructionConfig,
    pub d: f64,
    pub c: f64,
    pub anchors: Vec<Anchor>,
    pub divergence: DivergenceCertificate,
    pub minorant: StepFn,
    pub partition_a: Vec<f64>,
    pub placements: Vec<f64>,
    pub stage_count: usize,
    pub windows: Vec<StageWindow>,
    pub stage_checks: Vec<StageCheck>,
    /// Deepest dyadic level of `[0, 1)` whose intervals all hold a window.
    pub coverage_level: Option<u32>,
    pub q: ExponentProfile,
    pub omega: TransportMap,
    pub p_hat: ExponentProfile,
    pub audit: Vec<AuditCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<ExponentProfile>>,
}

impl ConstructionTrace {
    pub fn audit_passed(&self) -> bool {
        self.audit.iter().all(|a| a.passed)
    }

    /// Deepest cube level `m` with `dim * m <= coverage_level`.
    pub fn witness_level(&self) -> Option<u32> {
        self.coverage_level.map(|l| l / self.config.dim as u32)
    }
}

fn check(audit: &mut Vec<AuditCheck>, name: &str, passed: bool, detail: String) {
    audit.push(AuditCheck {
        name: name.to_string(),
        passed,
        detail,
    });
}

/// Runs the full pipeline on `p` (rearranged first) and audits every
/// invariant of the result.
pub fn construct(p: &ExponentProfile, config: &ConstructionConfig) -> Result<ConstructionTrace> {
    if config.dim == 0 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    let p_star = ExponentProfile::new(decreasing_rearrangement(p))?;
    let d = match config.d {
        Some(d) => d,
        None => {
            let tail = limsup_ratio_profile(&p_star, config.ratio_depth)?.tail_max();
            tail / 2.0
        }
    };
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::NotWitnessed(format!("ratio bound d = {d} is not positive")));
    }
    let c = config.c.unwrap_or((2.0 / d).exp());

    let h = clip_exponent(&p_star, config.grid)?;
    let anchors = select_anchors(&h, d, config.max_anchors)?;
    let ts: Vec<f64> = anchors.iter().map(|a| a.t).collect();
    let minorant = build_minorant(&ts, d)?;
    let divergence = verify_divergence(&h, &ts, d, c)?;
    let partition_a = build_unit_partition(&h, c, config.max_stages)?;
    let stage_count = partition_a.len() - 1;
    let placements = dyadic_placements(stage_count);
    let scrambled = assemble_scrambled_exponent(&h, &partition_a, &placements, config.retain_stages)?;
    let q = scrambled.q;
    let samples = sample_points(config.samples, config.seed, &[]);
    let (omega, p_hat) = lift_exponent(&p_star, &q, &samples)?;

    let mut audit = Vec::new();
    check(
        &mut audit,
        "h non-increasing and h <= p*",
        h.is_non_increasing() && h.zip_cells(&p_star).all(|(_, _, a, b)| a <= b),
        format!("{} cells", h.cell_count()),
    );
    let worst_ratio = anchors.iter().map(|a| a.ratio).fold(f64::INFINITY, f64::min);
    check(
        &mut audit,
        "anchor ratio >= d",
        worst_ratio >= d,
        format!("{} anchors, min ratio {worst_ratio:.6} vs d = {d:.6}", anchors.len()),
    );
    check(
        &mut audit,
        "anchor gap 2 t_(k+1) < t_k",
        ts.windows(2).all(|w| 2.0 * w[1] < w[0]),
        format!("t_1 = {}, t_K = {}", ts[0], ts[ts.len() - 1]),
    );
    check(
        &mut audit,
        "minorant f <= h",
        minorant.zip_cells(&h).all(|(_, _, a, b)| a <= b),
        format!("{} cells", minorant.cell_count()),
    );
    let threshold = (1.0 / d).exp();
    check(
        &mut audit,
        "base c > e^(1/d)",
        c > threshold,
        format!("c = {c:.6}, e^(1/d) = {threshold:.6}"),
    );
    check(
        &mut audit,
        "divergence chain grows",
        divergence.grows,
        format!(
            "last log bound {:.3}",
            divergence.bounds.last().map_or(f64::NAN, |b| b.log_bound)
        ),
    );
    let band_err = partition_a
        .windows(2)
        .map(|w| (h.integrate_map_over(w[1], w[0], |v| c.powf(v)) - 1.0).abs())
        .fold(0.0, f64::max);
    check(
        &mut audit,
        "unit bands integrate to 1",
        band_err <= UNIT_BAND_TOLERANCE,
        format!("{stage_count} bands, max |error| {band_err:.3e}"),
    );
    check(
        &mut audit,
        "stage monotonicity p_(k-1) <= p_k",
        scrambled.checks.iter().all(|s| s.monotone),
        format!("{stage_count} stages"),
    );
    let h_mass = h.integrate();
    let worst_covered = scrambled
        .checks
        .iter()
        .map(|s| s.covered_mass)
        .fold(0.0, f64::max);
    check(
        &mut audit,
        "covered mass <= integral of h <= 2",
        worst_covered <= h_mass + UNIT_BAND_TOLERANCE && h_mass <= 2.0,
        format!("max covered mass {worst_covered:.6}, integral of h {h_mass:.6}"),
    );
    let worst_mass = scrambled
        .checks
        .iter()
        .map(|s| s.mass - (2.0 + s.uncovered_measure))
        .fold(f64::NEG_INFINITY, f64::max);
    let q_mass = q.integrate();
    check(
        &mut audit,
        "integral of q <= 3",
        worst_mass <= UNIT_BAND_TOLERANCE && q_mass <= 3.0,
        format!("integral of q {q_mass:.6}"),
    );
    let excess = distribution_excess(&q, &p_star);
    check(
        &mut audit,
        "q* <= p*",
        excess <= EXACT_TOLERANCE,
        format!("max distribution excess {excess:.3e}"),
    );
    let bad = samples
        .iter()
        .filter(|&&t| q.evaluate(t).unwrap() > p_hat.evaluate(t).unwrap())
        .count();
    let bad_measure = q
        .zip_cells(&p_hat)
        .filter(|&(_, _, a, b)| a > b)
        .fold(0.0, |acc, (s, t, _, _)| acc + (t - s));
    check(
        &mut audit,
        "q <= p_hat at sample points",
        bad == 0,
        format!(
            "{} points, {bad} violations; measure of {{q > p_hat}} {bad_measure:.3e}",
            samples.len()
        ),
    );
    let q_star = decreasing_rearrangement(&q);
    check(
        &mut audit,
        "q equimeasurable with q*",
        equimeasurable(&q, &q_star, EXACT_TOLERANCE),
        format!("{} cells", q.cell_count()),
    );
    check(
        &mut audit,
        "p_hat equimeasurable with p*",
        equimeasurable(&p_hat, &p_star, EXACT_TOLERANCE),
        format!("{} cells", p_hat.cell_count()),
    );

    let coverage_level = coverage_level(&scrambled.windows);
    Ok(ConstructionTrace {
        config: config.clone(),
        d,
        c,
        anchors,
        divergence,
        minorant,
        partition_a,
        placements,
        stage_count,
        windows: scrambled.windows,
        stage_checks: scrambled.checks,
        coverage_level,
        q,
        omega,
        p_hat,
        audit,
        stages: scrambled.stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::log_profile;

    fn small_grid() -> GeometricGrid {
        GeometricGrid::new(20, 16).unwrap()
    }

    #[test]
    fn clip_examples() {
        let g = small_grid();
        let one = ExponentProfile::constant(1.0).unwrap();
        let h = clip_exponent(&one, g).unwrap();
        assert!(h.values().iter().all(|&v| v == 1.0));

        let double = log_profile(g, 2.0).unwrap();
        let h = clip_exponent(&double, g).unwrap();
        assert_eq!(h, log_profile(g, 1.0).unwrap());

        let single = log_profile(g, 1.0).unwrap();
        assert_eq!(clip_exponent(&single, g).unwrap(), single);
    }

    #[test]
    fn anchors_on_log_minorant() {
        let h = log_profile(small_grid(), 1.0).unwrap();
        let a = select_anchors(&h, 0.5, 100).unwrap();
        assert_eq!(a[0].t, 1.0);
        assert!(a.iter().all(|x| x.ratio >= 0.5));
        assert!(a.windows(2).all(|w| 2.0 * w[1].t < w[0].t));
        // roughly one anchor per octave down to the grid floor
        assert!(a.len() >= 18, "{}", a.len());
        assert!(a[a.len() - 1].t <= (-18f64).exp2());
        let b = select_anchors(&h, 0.5, 3).unwrap();
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn anchors_on_constant_one() {
        let h = clip_exponent(&ExponentProfile::constant(1.0).unwrap(), small_grid()).unwrap();
        let a = select_anchors(&h, 0.5, 100).unwrap();
        // ratio 1/ln(e/t) >= 1/2 only for t >= 1/e
        assert!(a.iter().all(|x| x.t >= (-1.0f64).exp()));
        assert_eq!(a.len(), 2);
        let err = select_anchors(&h, 1.5, 100).unwrap_err();
        assert!(matches!(err, Error::NotWitnessed(_)));
    }

    #[test]
    fn minorant_shape() {
        let f = build_minorant(&[0.5], 0.5).unwrap();
        assert_eq!(f.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(f.values(), &[0.5 * log_e_over(0.5), 1.0]);

        let f = build_minorant(&[1.0, 0.25, 0.0625], 0.5).unwrap();
        assert_eq!(f.breakpoints(), &[0.0, 0.0625, 0.25, 1.0]);
        assert_eq!(f.evaluate(0.07).unwrap(), 0.5 * log_e_over(0.25));
        assert_eq!(f.evaluate(0.3).unwrap(), 0.5);
    }

    #[test]
    fn minorant_below_h_at_points() {
        let h = log_profile(small_grid(), 1.0).unwrap();
        let a = select_anchors(&h, 0.5, 100).unwrap();
        let ts: Vec<f64> = a.iter().map(|x| x.t).collect();
        let f = build_minorant(&ts, 0.5).unwrap();
        for t in sample_points(1000, 7, &[]) {
            assert!(f.evaluate(t).unwrap() <= h.evaluate(t).unwrap());
        }
    }

    #[test]
    fn divergence_bounds() {
        let h = log_profile(small_grid(), 1.0).unwrap();
        let ts = [0.5, 0.125, 0.03125];
        let e2 = std::f64::consts::E.powi(2);
        let cert = verify_divergence(&h, &ts, 1.0, e2).unwrap();
        for b in &cert.bounds {
            // (t/2) (e/t)^2 = e^2 / (2t)
            let direct = (e2 / (2.0 * b.t)).ln();
            assert!((b.log_chain - direct).abs() < 1e-12);
            assert!(b.log_bound <= b.log_band_integral + 1e-12);
        }
        assert!(cert.grows);

        let err = verify_divergence(&h, &ts, 1.0, std::f64::consts::E).unwrap_err();
        assert!(matches!(err, Error::BaseTooSmall { .. }));
    }

    #[test]
    fn unit_partition_examples() {
        let h = ExponentProfile::constant(2.0).unwrap();
        assert_eq!(build_unit_partition(&h, 2.0, 64).unwrap(), vec![1.0, 0.75, 0.5, 0.25, 0.0]);
        assert_eq!(build_unit_partition(&h, 2.0, 2).unwrap(), vec![1.0, 0.75, 0.5]);

        let h = ExponentProfile::constant(1.0).unwrap();
        let a = build_unit_partition(&h, 1.5, 64).unwrap();
        assert_eq!(a, vec![1.0, 1.0 - 1.0 / 1.5]);

        let err = build_unit_partition(&ExponentProfile::constant(1.0).unwrap(), 0.5, 4).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn unit_bands_reintegrate() {
        let h = log_profile(small_grid(), 1.0).unwrap();
        let c = 4f64.exp();
        let a = build_unit_partition(&h, c, 64).unwrap();
        assert_eq!(a.len(), 65);
        for w in a.windows(2) {
            let band = h.integrate_map_over(w[1], w[0], |v| c.powf(v));
            assert!((band - 1.0).abs() < 1e-12, "{band}");
        }
    }

    #[test]
    fn placements_enumerate_dyadics() {
        assert_eq!(
            dyadic_placements(8),
            vec![0.0, 0.5, 0.25, 0.75, 0.125, 0.375, 0.625, 0.875]
        );
    }

    #[test]
    fn single_stage_unrolling() {
        let h = log_profile(small_grid(), 1.0).unwrap();
        let c = 4f64.exp();
        let a = build_unit_partition(&h, c, 1).unwrap();
        let s = assemble_scrambled_exponent(&h, &a, &[0.0], true).unwrap();
        let w = a[0] - a[1];
        for t in sample_points(500, 3, &[]) {
            let expect = if t < w { h.evaluate(a[1] + t).unwrap() } else { 1.0 };
            let got = s.q.evaluate(t).unwrap();
            // translated breakpoints may round by an ulp
            if (t - w).abs() > 1e-12 {
                assert_eq!(got, expect, "t = {t}");
            }
        }
        assert_eq!(s.stages.unwrap().len(), 1);
    }

    #[test]
    fn stages_are_monotone_and_clipped() {
        let h = log_profile(small_grid(), 1.0).unwrap();
        let c = 4f64.exp();
        let a = build_unit_partition(&h, c, 16).unwrap();
        let r = dyadic_placements(16);
        let s = assemble_scrambled_exponent(&h, &a, &r, false).unwrap();
        assert!(s.checks.iter().all(|k| k.monotone));
        assert!(s.checks.iter().all(|k| k.covered_mass <= h.integrate() + 1e-9));
        assert!(s.q.min_value() >= 1.0);
        assert!(s.stages.is_none());
        let err = assemble_scrambled_exponent(&h, &a, &r[..3], false).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn lift_of_sorted_q_is_identity() {
        let p = log_profile(small_grid(), 1.0).unwrap();
        let (omega, p_hat) = lift_exponent(&p, &p, &sample_points(100, 0, &[])).unwrap();
        assert!(omega.is_identity());
        assert_eq!(p_hat, p);

        let too_big = ExponentProfile::constant(50.0).unwrap();
        let err = lift_exponent(&p, &too_big, &[]).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)));
    }

    #[test]
    fn coverage_of_windows() {
        let w = |start: f64, end: f64| StageWindow {
            stage: 0,
            band: [0.0, 0.0],
            start,
            end,
            clipped: end > 1.0,
        };
        assert_eq!(coverage_level(&[w(0.0, 0.4), w(0.5, 0.9)]), Some(1));
        assert_eq!(coverage_level(&[w(0.0, 0.6)]), Some(0));
        assert_eq!(coverage_level(&[w(0.5, 1.2)]), None);
    }

    #[test]
    fn small_pipeline_passes_audit_and_replays() {
        let cfg = ConstructionConfig {
            grid: small_grid(),
            ratio_depth: 20,
            samples: 2000,
            max_stages: 16,
            ..Default::default()
        };
        let p = log_profile(small_grid(), 1.0).unwrap();
        let tr = construct(&p, &cfg).unwrap();
        for a in &tr.audit {
            assert!(a.passed, "{}: {}", a.name, a.detail);
        }
        assert_eq!(tr.stage_count, 16);
        assert!(tr.coverage_level.is_some());
        let again = construct(&p, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&tr).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn constant_profile_is_not_witnessed() {
        let cfg = ConstructionConfig {
            grid: small_grid(),
            ratio_depth: 20,
            // h <= ln(e/t), so no ratio reaches 1.5
            d: Some(1.5),
            ..Default::default()
        };
        let p = ExponentProfile::constant(2.0).unwrap();
        let err = construct(&p, &cfg).unwrap_err();
        assert!(matches!(err, Error::NotWitnessed(_)));
    }
}
