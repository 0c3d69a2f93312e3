//! Work and heat statistics of quantum Otto engines.
//!
//! The crate models two-level, harmonic and adiabatically driven
//! scale-invariant engines under the two-point measurement scheme. It
//! provides the joint distribution of hot-bath heat `Q2` and work `W`, the
//! scaled cumulant generating function `φ(γ1, γ2)`, large-deviation rate
//! functions of the stochastic efficiency `η = -W/Q2`, and a Monte Carlo
//! sampler of engine cycles for cross-checks.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cgf;
pub mod engines;
pub mod error;
pub mod export;
pub mod joint;
pub mod ldf;
pub mod minimize;
pub mod montecarlo;
pub mod numeric;
pub mod par;
pub mod series;

pub use cgf::{Cgf, CgfValue, Expansion, HarmonicCgf, ScaleInvariantCgf, TwoLevelCgf, UndefinedReason};
pub use engines::{BathPair, EngineModel, HarmonicEngine, ScaleInvariantEngine, TwoLevelEngine};
pub use error::{Error, Result};
pub use joint::{JointDistribution, MomentSummary, Pearson};
pub use ldf::{RateFunctionCurve, RatePoint, RateStatus, SearchConfig};
