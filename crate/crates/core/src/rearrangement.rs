//! Distribution functions, decreasing rearrangements and the piecewise
//! translation that sorts a step function into its rearrangement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{StepBuilder, StepFn};

/// Gap or overlap allowed between consecutive transport pieces.
pub const TILING_TOLERANCE: f64 = 1e-12;

/// Measure of `{t : f(t) > lambda}`.
pub fn distribution_function(f: &StepFn, lambda: f64) -> f64 {
    f.cells()
        .filter(|c| c.value > lambda)
        .map(|c| c.len())
        .sum()
}

/// Cell indices of `f` ordered by descending value; ties keep their
/// original order.
fn descending_order(f: &StepFn) -> Vec<usize> {
    let mut order: Vec<usize> = (0..f.cell_count()).collect();
    let v = f.values();
    order.sort_by(|&i, &j| v[j].total_cmp(&v[i]));
    order
}

/// Target start of every cell (indexed by source cell) when cells are laid
/// out in `order`. The identity prefix reuses the source breakpoints so that
/// an already sorted function maps onto itself exactly.
fn target_starts(f: &StepFn, order: &[usize]) -> Vec<f64> {
    let x = f.breakpoints();
    let mut starts = vec![0.0; order.len()];
    let mut at = 0.0;
    let mut identity = true;
    for (k, &i) in order.iter().enumerate() {
        identity &= i == k;
        if identity {
            at = x[k];
        }
        starts[i] = at;
        at += f.partition().cell_len(i);
    }
    starts
}

/// The non-increasing right-continuous function equimeasurable with `f`.
///
/// Cells keep their lengths and are laid out from the origin in descending
/// value order.
pub fn decreasing_rearrangement(f: &StepFn) -> StepFn {
    let order = descending_order(f);
    let starts = target_starts(f, &order);
    let mut b = StepBuilder::new();
    for &i in &order {
        b.push(starts[i], f.values()[i]);
    }
    b.finish().expect("rearrangement of a valid step function")
}

/// Distribution function of a step function, tabulated by descending value.
#[derive(Debug, Clone)]
pub struct DistributionTable {
    /// Distinct values, descending.
    levels: Vec<f64>,
    /// `mass[k]` = measure of `{f >= levels[k]}`.
    mass: Vec<f64>,
}

impl DistributionTable {
    pub fn new(f: &StepFn) -> Self {
        let order = descending_order(f);
        let mut levels: Vec<f64> = Vec::new();
        let mut mass: Vec<f64> = Vec::new();
        let mut acc = 0.0;
        for i in order {
            let c = f.cell(i);
            acc += c.len();
            if levels.last() == Some(&c.value) {
                *mass.last_mut().unwrap() = acc;
            } else {
                levels.push(c.value);
                mass.push(acc);
            }
        }
        Self { levels, mass }
    }

    /// Measure of `{f > lambda}`.
    pub fn measure_above(&self, lambda: f64) -> f64 {
        let k = self.levels.partition_point(|&v| v > lambda);
        if k == 0 {
            0.0
        } else {
            self.mass[k - 1]
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

/// Largest `|{f > l}| - |{g > l}|` over all levels `l`. Non-positive exactly
/// when `f* <= g*` everywhere.
pub fn distribution_excess(f: &StepFn, g: &StepFn) -> f64 {
    let (tf, tg) = (DistributionTable::new(f), DistributionTable::new(g));
    tf.levels()
        .iter()
        .chain(tg.levels())
        .map(|&l| tf.measure_above(l) - tg.measure_above(l))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Whether the distribution functions of `f` and `g` agree within
/// `tolerance` at every value attained by either function.
///
/// Distribution functions of step functions only jump at attained values, so
/// this finite check covers every level.
pub fn equimeasurable(f: &StepFn, g: &StepFn, tolerance: f64) -> bool {
    let (tf, tg) = (DistributionTable::new(f), DistributionTable::new(g));
    tf.levels()
        .iter()
        .chain(tg.levels())
        .all(|&l| (tf.measure_above(l) - tg.measure_above(l)).abs() <= tolerance)
}

/// One translation `[a, b) -> [dst, dst + b - a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportPiece {
    pub src: [f64; 2],
    pub dst: f64,
}

impl TransportPiece {
    pub fn len(&self) -> f64 {
        self.src[1] - self.src[0]
    }

    pub fn is_empty(&self) -> bool {
        !(self.src[1] > self.src[0])
    }

    pub fn dst_end(&self) -> f64 {
        self.dst + self.len()
    }
}

/// A measure-preserving map of `[0, 1)` made of finitely many translations.
///
/// Sources and targets both tile `[0, 1)`; pieces are stored by source start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TransportPiece>", into = "Vec<TransportPiece>")]
pub struct TransportMap {
    pieces: Vec<TransportPiece>,
}

impl TryFrom<Vec<TransportPiece>> for TransportMap {
    type Error = Error;

    fn try_from(pieces: Vec<TransportPiece>) -> Result<Self> {
        TransportMap::new(pieces)
    }
}

impl From<TransportMap> for Vec<TransportPiece> {
    fn from(m: TransportMap) -> Self {
        m.pieces
    }
}

fn check_tiling(intervals: &[(f64, f64)], what: &str) -> Result<()> {
    let mut at = 0.0;
    for &(a, b) in intervals {
        if (a - at).abs() > TILING_TOLERANCE {
            return Err(Error::Validation(format!(
                "{what} intervals do not tile [0, 1): {} at {at}",
                if a > at { "gap" } else { "overlap" }
            )));
        }
        at = b;
    }
    if (at - 1.0).abs() > TILING_TOLERANCE {
        return Err(Error::Validation(format!(
            "{what} intervals end at {at}, expected 1"
        )));
    }
    Ok(())
}

impl TransportMap {
    pub fn new(mut pieces: Vec<TransportPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Validation("transport map has no pieces".into()));
        }
        for p in &pieces {
            let [a, b] = p.src;
            if !(a >= 0.0 && a < b && b <= 1.0 && p.dst.is_finite()) {
                return Err(Error::Validation(format!(
                    "bad transport piece src [{a}, {b}) dst {}",
                    p.dst
                )));
            }
        }
        pieces.sort_by(|p, q| p.src[0].total_cmp(&q.src[0]));
        let src: Vec<_> = pieces.iter().map(|p| (p.src[0], p.src[1])).collect();
        check_tiling(&src, "source")?;
        let mut dst: Vec<_> = pieces.iter().map(|p| (p.dst, p.dst_end())).collect();
        dst.sort_by(|x, y| x.0.total_cmp(&y.0));
        check_tiling(&dst, "target")?;
        Ok(Self { pieces })
    }

    pub fn identity() -> Self {
        Self {
            pieces: vec![TransportPiece {
                src: [0.0, 1.0],
                dst: 0.0,
            }],
        }
    }

    pub fn pieces(&self) -> &[TransportPiece] {
        &self.pieces
    }

    /// Image of `t` in `[0, 1)`.
    pub fn apply(&self, t: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Domain(format!("point {t} outside [0, 1)")));
        }
        let k = self.pieces.partition_point(|p| p.src[0] <= t) - 1;
        let p = &self.pieces[k];
        Ok(p.dst + (t - p.src[0]))
    }

    pub fn is_identity(&self) -> bool {
        self.pieces.iter().all(|p| p.dst == p.src[0])
    }
}

/// The transport `omega` with `f = f* o omega`: one translation per cell of
/// `f`, targets laid out in descending value order.
pub fn sorting_transport(f: &StepFn) -> TransportMap {
    let order = descending_order(f);
    let starts = target_starts(f, &order);
    let pieces = f
        .cells()
        .zip(starts)
        .map(|(c, dst)| TransportPiece {
            src: [c.start, c.end],
            dst,
        })
        .collect();
    TransportMap::new(pieces).expect("sorting transport tiles by construction")
}

/// The step function `t -> p_star(omega(t))`.
///
/// Each piece is cut at the preimages of the breakpoints of `p_star` that
/// fall strictly inside its target interval. Breakpoints within a few ulps
/// of a target end are treated as coinciding with it.
pub fn pull_back(p_star: &StepFn, omega: &TransportMap) -> Result<StepFn> {
    // re-validate: the map may have been built by hand
    let omega = TransportMap::new(omega.pieces.clone())?;
    let x = p_star.breakpoints();
    let v = p_star.values();
    let mut b = StepBuilder::new();
    for piece in omega.pieces() {
        let [a, _] = piece.src;
        let (c, e) = (piece.dst, piece.dst_end());
        let eps = 4.0 * f64::EPSILON * c.abs().max(e.abs());
        let c0 = c.max(0.0);
        let mut j = x.partition_point(|&bp| bp <= c0 + eps).saturating_sub(1).min(v.len() - 1);
        b.push(a, v[j]);
        while j + 1 < v.len() && x[j + 1] < e - eps {
            j += 1;
            b.push(a + (x[j] - c), v[j]);
        }
    }
    b.finish()
}
