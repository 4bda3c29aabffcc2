//! Step functions on finite partitions of `[0, 1)`.
//!
//! Every cell is the right-open interval `[x_i, x_{i+1})`, so a step function
//! is right-continuous and evaluation at a breakpoint picks the cell that
//! starts there. All arithmetic is binary64; dyadic breakpoints are exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing breakpoints `0 = x_0 < x_1 < ... < x_M = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Partition1D {
    breakpoints: Vec<f64>,
}

impl Partition1D {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::Validation(
                "a partition needs at least the two endpoints 0 and 1".into(),
            ));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::Validation(format!(
                "partition must start at 0 and end at 1, got [{}, {}]",
                breakpoints[0],
                breakpoints.last().unwrap()
            )));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::Validation(format!(
                "breakpoints not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { breakpoints })
    }

    /// The trivial partition `{0, 1}`.
    pub fn unit() -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn cell_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn cell_len(&self, i: usize) -> f64 {
        self.breakpoints[i + 1] - self.breakpoints[i]
    }

    /// Index of the cell `[x_i, x_{i+1})` containing `t`.
    pub fn cell_index(&self, t: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Domain(format!("point {t} outside [0, 1)")));
        }
        // first breakpoint strictly greater than t, minus one
        Ok(self.breakpoints.partition_point(|&x| x <= t) - 1)
    }

    /// Index of the cell containing `t - 0`, for `t` in `(0, 1]`.
    pub fn cell_index_left(&self, t: f64) -> Result<usize> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Domain(format!(
                "left limit requested at {t}, outside (0, 1]"
            )));
        }
        Ok(self.breakpoints.partition_point(|&x| x < t) - 1)
    }

    /// Union of both breakpoint sets.
    pub fn union(&self, other: &Partition1D) -> Partition1D {
        let (a, b) = (&self.breakpoints, &other.breakpoints);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    x
                }
                (Some(&x), Some(&y)) if y < x => {
                    j += 1;
                    y
                }
                (Some(&x), Some(_)) => {
                    i += 1;
                    j += 1;
                    x
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (None, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            out.push(next);
        }
        Partition1D { breakpoints: out }
    }
}

impl TryFrom<Vec<f64>> for Partition1D {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Partition1D::new(v)
    }
}

impl From<Partition1D> for Vec<f64> {
    fn from(p: Partition1D) -> Self {
        p.breakpoints
    }
}

/// One cell of a step function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

impl Cell {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        !(self.end > self.start)
    }
}

#[derive(Serialize, Deserialize)]
struct RawStepFn {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

/// A nonnegative finite step function on a partition of `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepFn", into = "RawStepFn")]
pub struct StepFn {
    partition: Partition1D,
    values: Vec<f64>,
}

impl TryFrom<RawStepFn> for StepFn {
    type Error = Error;

    fn try_from(raw: RawStepFn) -> Result<Self> {
        StepFn::new(raw.breakpoints, raw.values)
    }
}

impl From<StepFn> for RawStepFn {
    fn from(f: StepFn) -> Self {
        RawStepFn {
            breakpoints: f.partition.breakpoints,
            values: f.values,
        }
    }
}

impl StepFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::from_partition(Partition1D::new(breakpoints)?, values)
    }

    pub fn from_partition(partition: Partition1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.cell_count() {
            return Err(Error::Validation(format!(
                "{} values for {} cells",
                values.len(),
                partition.cell_count()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Validation(format!(
                "step function values must be finite and >= 0, got {v}"
            )));
        }
        Ok(Self { partition, values })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::from_partition(Partition1D::unit(), vec![value])
    }

    /// Build from consecutive cell lengths. The last breakpoint is pinned to 1
    /// and cells that collapse under rounding are dropped.
    pub fn from_lengths(lengths: &[f64], values: &[f64]) -> Result<Self> {
        if lengths.len() != values.len() {
            return Err(Error::Validation(format!(
                "{} lengths for {} values",
                lengths.len(),
                values.len()
            )));
        }
        let total: f64 = lengths.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "cell lengths sum to {total}, expected 1"
            )));
        }
        let mut builder = StepBuilder::new();
        let mut at = 0.0;
        for (&len, &v) in lengths.iter().zip(values) {
            builder.push(at, v);
            at += len;
        }
        builder.finish()
    }

    pub fn partition(&self) -> &Partition1D {
        &self.partition
    }

    pub fn breakpoints(&self) -> &[f64] {
        self.partition.breakpoints()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    pub fn cell(&self, i: usize) -> Cell {
        let x = self.partition.breakpoints();
        Cell {
            start: x[i],
            end: x[i + 1],
            value: self.values[i],
        }
    }

    pub fn cells(&self) -> impl ExactSizeIterator<Item = Cell> + '_ {
        (0..self.values.len()).map(move |i| self.cell(i))
    }

    /// Value of the cell containing `t`, `t` in `[0, 1)`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.partition.cell_index(t)?])
    }

    /// Left limit `f(t - 0)`, `t` in `(0, 1]`.
    pub fn evaluate_left(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.partition.cell_index_left(t)?])
    }

    pub fn integrate(&self) -> f64 {
        self.cells().map(|c| c.value * c.len()).sum()
    }

    /// Integral of `g(f)` over `[a, b)`, clipping cells at the ends.
    pub fn integrate_map_over(&self, a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let a = a.max(0.0);
        let b = b.min(1.0);
        let x = self.breakpoints();
        let first = x.partition_point(|&bp| bp <= a).saturating_sub(1);
        let mut sum = 0.0;
        for i in first..self.values.len() {
            let lo = x[i].max(a);
            let hi = x[i + 1].min(b);
            if lo >= b {
                break;
            }
            if hi > lo {
                sum += g(self.values[i]) * (hi - lo);
            }
        }
        sum
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// True when consecutive cell values never increase.
    pub fn is_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }

    /// Apply `g` to every value on the same partition.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> Result<StepFn> {
        StepFn::from_partition(self.partition.clone(), self.values.iter().map(|&v| g(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Result<StepFn> {
        self.map(|v| c * v)
    }

    /// Re-express this function on a finer partition.
    pub fn refine_to(&self, finer: &Partition1D) -> Result<StepFn> {
        let x = self.breakpoints();
        let mut values = Vec::with_capacity(finer.cell_count());
        let mut i = 0;
        for &start in &finer.breakpoints()[..finer.cell_count()] {
            while x[i + 1] <= start {
                i += 1;
            }
            values.push(self.values[i]);
        }
        // every breakpoint of self must be present in the finer partition
        let fb = finer.breakpoints();
        if x.iter().any(|bp| fb.binary_search_by(|p| p.total_cmp(bp)).is_err()) {
            return Err(Error::Validation(
                "target partition is not a refinement".into(),
            ));
        }
        StepFn::from_partition(finer.clone(), values)
    }

    /// Merged walk over the common refinement: `(start, end, self value, other value)`.
    pub fn zip_cells<'a>(&'a self, other: &'a StepFn) -> ZipCells<'a> {
        ZipCells {
            f: self,
            g: other,
            i: 0,
            j: 0,
            at: 0.0,
        }
    }

    /// Pointwise minimum on the common refinement.
    pub fn pointwise_min(&self, other: &StepFn) -> StepFn {
        let mut b = StepBuilder::new();
        for (start, _, u, v) in self.zip_cells(other) {
            b.push(start, u.min(v));
        }
        b.finish().expect("refinement of valid step functions is valid")
    }

    /// Merge neighbouring cells with equal values.
    pub fn simplified(&self) -> StepFn {
        let mut b = StepBuilder::new();
        for c in self.cells() {
            b.push_merging(c.start, c.value);
        }
        b.finish().expect("simplifying a valid step function is valid")
    }
}

/// Iterator over cells of the common refinement of two step functions.
pub struct ZipCells<'a> {
    f: &'a StepFn,
    g: &'a StepFn,
    i: usize,
    j: usize,
    at: f64,
}

impl Iterator for ZipCells<'_> {
    type Item = (f64, f64, f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.i >= self.f.cell_count() || self.j >= self.g.cell_count() {
            return None;
        }
        let fe = self.f.breakpoints()[self.i + 1];
        let ge = self.g.breakpoints()[self.j + 1];
        let end = fe.min(ge);
        let item = (self.at, end, self.f.values[self.i], self.g.values[self.j]);
        if fe == end {
            self.i += 1;
        }
        if ge == end {
            self.j += 1;
        }
        self.at = end;
        Some(item)
    }
}

/// Both functions expressed on the union of their partitions.
pub fn common_refinement(f: &StepFn, g: &StepFn) -> (StepFn, StepFn) {
    let union = f.partition.union(&g.partition);
    let (mut fv, mut gv) = (Vec::new(), Vec::new());
    for (_, _, u, v) in f.zip_cells(g) {
        fv.push(u);
        gv.push(v);
    }
    (
        StepFn {
            partition: union.clone(),
            values: fv,
        },
        StepFn {
            partition: union,
            values: gv,
        },
    )
}

/// The indicator of `[a, b)`.
pub fn indicator(a: f64, b: f64) -> Result<StepFn> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::Domain(format!(
            "indicator needs 0 <= a < b <= 1, got a = {a}, b = {b}"
        )));
    }
    let mut bps = vec![0.0];
    let mut vals = Vec::new();
    if a > 0.0 {
        bps.push(a);
        vals.push(0.0);
    }
    vals.push(1.0);
    if b < 1.0 {
        bps.push(b);
        vals.push(0.0);
    }
    bps.push(1.0);
    StepFn::new(bps, vals)
}

/// Accumulates cells left to right by start point.
///
/// A cell whose start does not exceed the previous start replaces the
/// previous cell; this absorbs cells that collapse to zero width under
/// floating rounding.
#[derive(Debug, Default)]
pub struct StepBuilder {
    starts: Vec<f64>,
    values: Vec<f64>,
}

impl StepBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, start: f64, value: f64) {
        let start = if self.starts.is_empty() { 0.0 } else { start };
        while let Some(&last) = self.starts.last() {
            if start <= last {
                self.starts.pop();
                self.values.pop();
            } else {
                break;
            }
        }
        if start >= 1.0 {
            return;
        }
        self.starts.push(if self.starts.is_empty() { 0.0 } else { start });
        self.values.push(value);
    }

    /// Like `push`, but extends the previous cell when the value repeats.
    pub fn push_merging(&mut self, start: f64, value: f64) {
        if self.values.last() == Some(&value) {
            return;
        }
        self.push(start, value);
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn finish(mut self) -> Result<StepFn> {
        if self.starts.is_empty() {
            return Err(Error::Validation("no cells".into()));
        }
        self.starts.push(1.0);
        StepFn::new(self.starts, self.values)
    }
}

/// A step function with every value `>= 1`, used as a variable exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFn", into = "StepFn")]
pub struct ExponentProfile(StepFn);

impl ExponentProfile {
    pub fn new(f: StepFn) -> Result<Self> {
        if let Some(v) = f.values().iter().find(|&&v| v < 1.0) {
            return Err(Error::Validation(format!(
                "exponent values must be >= 1, got {v}"
            )));
        }
        Ok(Self(f))
    }

    pub fn constant(p: f64) -> Result<Self> {
        Self::new(StepFn::constant(p)?)
    }

    pub fn as_fn(&self) -> &StepFn {
        &self.0
    }

    pub fn into_inner(self) -> StepFn {
        self.0
    }
}

impl TryFrom<StepFn> for ExponentProfile {
    type Error = Error;

    fn try_from(f: StepFn) -> Result<Self> {
        ExponentProfile::new(f)
    }
}

impl From<ExponentProfile> for StepFn {
    fn from(p: ExponentProfile) -> Self {
        p.0
    }
}

impl std::ops::Deref for ExponentProfile {
    type Target = StepFn;

    fn deref(&self) -> &StepFn {
        &self.0
    }
}
