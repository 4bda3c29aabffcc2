//! Step-function toolkit for rearrangement-invariant questions about
//! variable exponent Lebesgue spaces.
//!
//! Exponents are step functions on finite partitions of `[0, 1)`. The crate
//! computes decreasing rearrangements, Luxemburg, Orlicz and Marcinkiewicz
//! norms, finite-depth diagnostics of the ratio `p*(t) / ln(e/t)`, the
//! construction of an exponent whose dyadic cube norms stay bounded below,
//! and the digit interleaving that carries it to `[0, 1)^n`.

// `!(a < b)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod construction;
pub mod diagnostics;
pub mod error;
pub mod interleave;
pub mod measure;
pub mod norms;
pub mod profiles;
pub mod rearrangement;

pub use construction::{construct, ConstructionConfig, ConstructionTrace};
pub use diagnostics::{IntegralVerdict, PartialIntegrals, RatioProfile, ScanReport};
pub use error::{Error, Result};
pub use interleave::{DyadicInterval, DyadicRect, GridExponentND};
pub use measure::{Cell, ExponentProfile, Partition1D, StepFn};
pub use norms::NormResult;
pub use profiles::{GeometricGrid, ProfileKind};
pub use rearrangement::TransportMap;
