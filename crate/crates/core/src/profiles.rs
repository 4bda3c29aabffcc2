//! Geometric grids and the built-in exponent profiles.
//!
//! Functions with a singularity at the origin, such as `ln(e/t)`, are
//! discretized by sampling each cell at its right endpoint. For a decreasing
//! function this gives a pointwise minorant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ExponentProfile, StepFn};

/// Breakpoints `2^{-depth}, ..., 1/2, 1`, each octave `[2^{-j-1}, 2^{-j})`
/// split into `per_octave` equal cells. The cell `[0, 2^{-depth})` closes
/// the grid at the origin. With a power-of-two `per_octave` every
/// breakpoint is an exact dyadic rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometricGrid {
    pub depth: u32,
    pub per_octave: u32,
}

impl Default for GeometricGrid {
    fn default() -> Self {
        Self {
            depth: 40,
            per_octave: 4096,
        }
    }
}

impl GeometricGrid {
    pub fn new(depth: u32, per_octave: u32) -> Result<Self> {
        if depth == 0 || depth > 1000 {
            return Err(Error::Domain(format!("grid depth {depth} outside 1..=1000")));
        }
        if per_octave == 0 {
            return Err(Error::Domain("per_octave must be >= 1".into()));
        }
        Ok(Self { depth, per_octave })
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let s = self.per_octave as usize;
        let mut out = Vec::with_capacity(2 + self.depth as usize * s);
        out.push(0.0);
        for j in (0..self.depth as i32).rev() {
            let lo = (-(j + 1) as f64).exp2();
            for i in 0..s {
                out.push(lo + lo * (i as f64) / (s as f64));
            }
        }
        out.push(1.0);
        out
    }

    /// Step function with value `g(x_{i+1})` on each cell `[x_i, x_{i+1})`.
    pub fn sample_right(&self, g: impl Fn(f64) -> f64) -> Result<StepFn> {
        let bps = self.breakpoints();
        let values = bps[1..].iter().map(|&x| g(x)).collect();
        StepFn::new(bps, values)
    }
}

/// `ln(e/t) = 1 - ln t`.
pub fn log_e_over(t: f64) -> f64 {
    1.0 - t.ln()
}

/// Right-endpoint minorant of `scale * ln(e/t)`, floored at 1.
pub fn log_profile(grid: GeometricGrid, scale: f64) -> Result<ExponentProfile> {
    ExponentProfile::new(grid.sample_right(|t| (scale * log_e_over(t)).max(1.0))?)
}

/// Right-endpoint minorant of `sqrt(ln(e/t))`.
pub fn sqrt_log_profile(grid: GeometricGrid) -> Result<ExponentProfile> {
    ExponentProfile::new(grid.sample_right(|t| log_e_over(t).sqrt())?)
}

/// Built-in profile generators, parsed from `log`, `log:<scale>`,
/// `sqrtlog` or `const:<p0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    Log { scale: f64 },
    SqrtLog,
    Const { p0: f64 },
}

impl ProfileKind {
    pub fn generate(&self, grid: GeometricGrid) -> Result<ExponentProfile> {
        match *self {
            ProfileKind::Log { scale } => log_profile(grid, scale),
            ProfileKind::SqrtLog => sqrt_log_profile(grid),
            ProfileKind::Const { p0 } => ExponentProfile::constant(p0),
        }
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let parse_arg = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::Validation(format!("bad numeric argument {a:?} in {s:?}")))
        };
        match (name, arg) {
            ("log", None) => Ok(ProfileKind::Log { scale: 1.0 }),
            ("log", Some(a)) => {
                let scale = parse_arg(a)?;
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Domain(format!("log scale must be positive, got {scale}")));
                }
                Ok(ProfileKind::Log { scale })
            }
            ("sqrtlog", None) => Ok(ProfileKind::SqrtLog),
            ("const", Some(a)) => {
                let p0 = parse_arg(a)?;
                if !(p0 >= 1.0 && p0.is_finite()) {
                    return Err(Error::Domain(format!("constant exponent must be >= 1, got {p0}")));
                }
                Ok(ProfileKind::Const { p0 })
            }
            _ => Err(Error::Validation(format!(
                "unknown profile generator {s:?} (expected log, log:<scale>, sqrtlog, const:<p0>)"
            ))),
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKind::Log { scale } if *scale == 1.0 => write!(f, "log"),
            ProfileKind::Log { scale } => write!(f, "log:{scale}"),
            ProfileKind::SqrtLog => write!(f, "sqrtlog"),
            ProfileKind::Const { p0 } => write!(f, "const:{p0}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_breakpoints_are_dyadic_and_increasing() {
        let g = GeometricGrid::new(3, 4).unwrap();
        let b = g.breakpoints();
        assert_eq!(b.len(), 2 + 3 * 4);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[1], 0.125);
        assert_eq!(*b.last().unwrap(), 1.0);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert!(b.contains(&0.5) && b.contains(&0.25) && b.contains(&0.875));
    }

    #[test]
    fn log_profile_is_a_minorant() {
        let g = GeometricGrid::new(10, 8).unwrap();
        let p = log_profile(g, 1.0).unwrap();
        assert!(p.is_non_increasing());
        for c in p.cells() {
            assert!(c.value <= log_e_over(c.end) + 1e-15);
            assert!(c.value <= log_e_over((c.start + c.end) / 2.0));
        }
        assert_eq!(p.values()[p.cell_count() - 1], 1.0);
    }

    #[test]
    fn parse_generators() {
        assert_eq!("log".parse::<ProfileKind>().unwrap(), ProfileKind::Log { scale: 1.0 });
        assert_eq!("log:2".parse::<ProfileKind>().unwrap(), ProfileKind::Log { scale: 2.0 });
        assert_eq!("sqrtlog".parse::<ProfileKind>().unwrap(), ProfileKind::SqrtLog);
        assert_eq!("const:2".parse::<ProfileKind>().unwrap(), ProfileKind::Const { p0: 2.0 });
        assert!("const:0.5".parse::<ProfileKind>().is_err());
        assert!("const".parse::<ProfileKind>().is_err());
        assert!("cubic".parse::<ProfileKind>().is_err());
        assert_eq!(ProfileKind::Const { p0: 2.0 }.to_string(), "const:2");
    }
}
