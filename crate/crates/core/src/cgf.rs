//! Scaled cumulant generating functions `φ(γ1, γ2) = ln⟨exp(γ1 Q2 + γ2 W)⟩`.
//!
//! Each closed-form characteristic function is evaluated at real arguments
//! (the Wick-rotated form) and normalized by its own value at the origin, so
//! `φ(0, 0) = 0` holds exactly for every variant. Points outside the
//! convergence domain evaluate to [`CgfValue::Undefined`].

use serde::Serialize;

use crate::engines::{BathPair, HarmonicEngine, ScaleInvariantEngine, TwoLevelEngine};
use crate::error::{param, Result};
use crate::joint::JointDistribution;
use crate::numeric::{ln_2cosh, log_sum_exp};

/// Why a generating function has no finite value at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UndefinedReason {
    /// A harmonic radicand is zero or negative.
    RadicandNonpositive,
    /// A geometric transition series does not converge (`u0 v0 ≥ 1` or `x0 y0 ≥ 1`).
    SeriesDivergent,
    /// A Gibbs-weighted sum over an unbounded spectrum diverges.
    SpectralSumDivergent,
    /// A first-order expansion of the generating function is not positive.
    NonpositiveExpansion,
}

/// Value of a generating function at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CgfValue {
    Finite(f64),
    Undefined(UndefinedReason),
}

impl CgfValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            CgfValue::Finite(v) => Some(v),
            CgfValue::Undefined(_) => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, CgfValue::Finite(_))
    }

    /// Finite value, or `+∞` outside the domain (the convention for
    /// minimization).
    pub fn or_infinity(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    fn from_log(v: f64, reason: UndefinedReason) -> Self {
        if v.is_finite() {
            CgfValue::Finite(v)
        } else {
            CgfValue::Undefined(reason)
        }
    }
}

/// A normalized bivariate generating function.
///
/// Implementations are pure, so contour grids and rate curves may evaluate
/// them from many threads.
pub trait Cgf: Sync {
    fn eval(&self, g1: f64, g2: f64) -> CgfValue;

    /// Smallest energy quantum carried by heat or work; sets the default
    /// `γ` search scale.
    fn min_quantum(&self) -> f64;

    /// Carnot efficiency of the baths the engine runs between, if known.
    fn eta_carnot(&self) -> Option<f64> {
        None
    }
}

impl<C: Cgf + ?Sized> Cgf for &C {
    fn eval(&self, g1: f64, g2: f64) -> CgfValue {
        (**self).eval(g1, g2)
    }

    fn min_quantum(&self) -> f64 {
        (**self).min_quantum()
    }

    fn eta_carnot(&self) -> Option<f64> {
        (**self).eta_carnot()
    }
}

/// Which form of the characteristic function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expansion {
    Exact,
    /// First order around the adiabatic point.
    Linear,
}

/// Which transition-probability factor multiplies a characteristic-function term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionFactor {
    /// `u²`: no transition in either stroke.
    NoFlip,
    /// `v²`: a transition in both strokes.
    DoubleFlip,
    /// `u v`: a transition in exactly one stroke.
    SingleFlip,
}

/// One term `factor · exp(ln_weight + γ1 q2 + γ2 w)` of the two-level
/// generating function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfTerm {
    pub factor: TransitionFactor,
    pub ln_weight: f64,
    pub q2: f64,
    pub w: f64,
}

/// Two-level generating function, exact or linearized in `u - 1`.
#[derive(Debug, Clone)]
pub struct TwoLevelCgf {
    engine: TwoLevelEngine,
    baths: BathPair,
    terms: [MgfTerm; 10],
    coefficients: [f64; 3],
    offset: f64,
}

impl TwoLevelCgf {
    pub fn new(engine: TwoLevelEngine, baths: BathPair, expansion: Expansion) -> Self {
        let (u, v) = (engine.u(), engine.v());
        // u², v², uv; the linear form keeps terms through first order in u - 1.
        let coefficients = match expansion {
            Expansion::Exact => [u * u, v * v, u * v],
            Expansion::Linear => [2.0 * u - 1.0, 0.0, v],
        };
        let mut cgf = Self {
            engine,
            baths,
            terms: two_level_terms(&engine, &baths),
            coefficients,
            offset: 0.0,
        };
        cgf.offset = cgf.ln_mgf(0.0, 0.0).unwrap_or(0.0);
        cgf
    }

    pub fn engine(&self) -> &TwoLevelEngine {
        &self.engine
    }

    pub fn terms(&self) -> &[MgfTerm; 10] {
        &self.terms
    }

    fn coefficient(&self, factor: TransitionFactor) -> f64 {
        match factor {
            TransitionFactor::NoFlip => self.coefficients[0],
            TransitionFactor::DoubleFlip => self.coefficients[1],
            TransitionFactor::SingleFlip => self.coefficients[2],
        }
    }

    /// Logarithm of the signed ten-term sum, `None` when it is not positive.
    fn ln_mgf(&self, g1: f64, g2: f64) -> Option<f64> {
        let mut pos = Vec::with_capacity(10);
        let mut neg = Vec::new();
        for t in &self.terms {
            let c = self.coefficient(t.factor);
            if c == 0.0 {
                continue;
            }
            let e = c.abs().ln() + t.ln_weight + g1 * t.q2 + g2 * t.w;
            if c > 0.0 {
                pos.push(e);
            } else {
                neg.push(e);
            }
        }
        let lp = log_sum_exp(pos);
        if neg.is_empty() {
            return lp.is_finite().then_some(lp);
        }
        let ln = log_sum_exp(neg);
        if !(lp > ln) {
            return None;
        }
        let v = lp + (-(ln - lp).exp()).ln_1p();
        v.is_finite().then_some(v)
    }
}

impl Cgf for TwoLevelCgf {
    fn eval(&self, g1: f64, g2: f64) -> CgfValue {
        match self.ln_mgf(g1, g2) {
            Some(v) => CgfValue::from_log(v - self.offset, UndefinedReason::NonpositiveExpansion),
            None => CgfValue::Undefined(UndefinedReason::NonpositiveExpansion),
        }
    }

    fn min_quantum(&self) -> f64 {
        2.0 * self.engine.nu0()
    }

    fn eta_carnot(&self) -> Option<f64> {
        Some(self.baths.eta_carnot())
    }
}

/// The ten terms of the two-level characteristic function at real
/// arguments, with `x = β_c ν0` and `y = β_h ν_τ`. Terms sharing a cosh
/// collect the two thermal occupations that produce the same `(Q2, W)`.
pub fn two_level_terms(engine: &TwoLevelEngine, baths: &BathPair) -> [MgfTerm; 10] {
    use TransitionFactor::*;
    let x = baths.beta_c() * engine.nu0();
    let y = baths.beta_h() * engine.nu_tau();
    let cq = 2.0 * engine.nu0();
    let hq = 2.0 * engine.nu_tau();
    let term = |factor, ln_weight, q2, w| MgfTerm {
        factor,
        ln_weight,
        q2,
        w,
    };
    [
        term(NoFlip, ln_2cosh(x + y), 0.0, 0.0),
        term(DoubleFlip, ln_2cosh(x - y), 0.0, 0.0),
        term(SingleFlip, -x + ln_2cosh(y), 0.0, -cq),
        term(SingleFlip, x + ln_2cosh(y), 0.0, cq),
        term(NoFlip, x - y, hq, cq - hq),
        term(DoubleFlip, -x - y, hq, -(cq + hq)),
        term(SingleFlip, -y + ln_2cosh(x), hq, -hq),
        term(NoFlip, -x + y, -hq, hq - cq),
        term(DoubleFlip, x + y, -hq, cq + hq),
        term(SingleFlip, y + ln_2cosh(x), -hq, hq),
    ]
}

/// Real-argument substitutions of the harmonic generating-function
/// variables, stored as logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WickVariables {
    pub ln_u0: f64,
    pub ln_v0: f64,
    pub ln_x0: f64,
    pub ln_y0: f64,
}

impl WickVariables {
    /// `u0 = e^{-ω0(β_c + γ2)}`, `v0 = e^{ω_τ(γ2 - γ1)}`,
    /// `x0 = e^{-β_h ω_τ + ω_τ(γ1 - γ2)}`, `y0 = e^{ω0 γ2}`.
    pub fn at(engine: &HarmonicEngine, baths: &BathPair, g1: f64, g2: f64) -> Self {
        let (w0, wt) = (engine.omega0(), engine.omega_tau());
        Self {
            ln_u0: -w0 * (baths.beta_c() + g2),
            ln_v0: wt * (g2 - g1),
            ln_x0: -baths.beta_h() * wt + wt * (g1 - g2),
            ln_y0: w0 * g2,
        }
    }

    pub fn u0(&self) -> f64 {
        self.ln_u0.exp()
    }

    pub fn v0(&self) -> f64 {
        self.ln_v0.exp()
    }

    pub fn x0(&self) -> f64 {
        self.ln_x0.exp()
    }

    pub fn y0(&self) -> f64 {
        self.ln_y0.exp()
    }
}

/// Harmonic generating function, exact or linearized in `Q* - 1`.
#[derive(Debug, Clone)]
pub struct HarmonicCgf {
    engine: HarmonicEngine,
    baths: BathPair,
    expansion: Expansion,
    offset: f64,
}

impl HarmonicCgf {
    pub fn new(engine: HarmonicEngine, baths: BathPair, expansion: Expansion) -> Self {
        let mut cgf = Self {
            engine,
            baths,
            expansion,
            offset: 0.0,
        };
        cgf.offset = match cgf.ln_mgf(0.0, 0.0) {
            Ok(v) => v,
            Err(_) => unreachable!("harmonic generating function is finite at the origin"),
        };
        cgf
    }

    pub fn engine(&self) -> &HarmonicEngine {
        &self.engine
    }

    fn ln_mgf(&self, g1: f64, g2: f64) -> std::result::Result<f64, UndefinedReason> {
        let wv = WickVariables::at(&self.engine, &self.baths, g1, g2);
        let ln_uv = wv.ln_u0 + wv.ln_v0;
        let ln_xy = wv.ln_x0 + wv.ln_y0;
        if !(ln_uv < 0.0 && ln_xy < 0.0) {
            return Err(UndefinedReason::SeriesDivergent);
        }
        let q = self.engine.q_star();
        match self.expansion {
            Expansion::Exact => {
                let r_exp = ln_radicand(wv.ln_u0, wv.ln_v0, q).ok_or(UndefinedReason::RadicandNonpositive)?;
                let r_com = ln_radicand(wv.ln_x0, wv.ln_y0, q).ok_or(UndefinedReason::RadicandNonpositive)?;
                Ok(std::f64::consts::LN_2 - 0.5 * (r_exp + r_com))
            }
            Expansion::Linear => {
                let ratio_exp = curvature_ratio(wv.ln_u0, wv.ln_v0);
                let ratio_com = curvature_ratio(wv.ln_x0, wv.ln_y0);
                let bracket = 1.0 + (1.0 - q) / 4.0 * (ratio_exp + ratio_com);
                if !(bracket > 0.0) || !bracket.is_finite() {
                    return Err(UndefinedReason::NonpositiveExpansion);
                }
                Ok(-(-ln_uv.exp_m1()).ln() - (-ln_xy.exp_m1()).ln() + bracket.ln())
            }
        }
    }
}

impl Cgf for HarmonicCgf {
    fn eval(&self, g1: f64, g2: f64) -> CgfValue {
        match self.ln_mgf(g1, g2) {
            Ok(v) => CgfValue::from_log(v - self.offset, UndefinedReason::RadicandNonpositive),
            Err(reason) => CgfValue::Undefined(reason),
        }
    }

    fn min_quantum(&self) -> f64 {
        self.engine.omega0()
    }

    fn eta_carnot(&self) -> Option<f64> {
        Some(self.baths.eta_carnot())
    }
}

/// `ln R(a, b)` for `R = Q(1 - a²)(1 - b²) + (1 + a²)(1 + b²) - 4ab`, given
/// `ln a`, `ln b` with `ab < 1`. Uses `R = 2(1 - ab)² + (Q - 1)(1 - a²)(1 - b²)`
/// scaled by `max(1, a)² max(1, b)²` so that neither cancellation near the
/// adiabatic point nor large arguments lose precision. `None` if `R ≤ 0`.
pub(crate) fn ln_radicand(ln_a: f64, ln_b: f64, q: f64) -> Option<f64> {
    let sa = ln_a.max(0.0);
    let sb = ln_b.max(0.0);
    let t = (-(sa + sb)).exp() * (ln_a + ln_b).exp_m1();
    let pa = scaled_one_minus_sq(ln_a);
    let pb = scaled_one_minus_sq(ln_b);
    let r = 2.0 * t * t + (q - 1.0) * pa * pb;
    (r > 0.0 && r.is_finite()).then(|| 2.0 * (sa + sb) + r.ln())
}

/// `(1 - a²) / max(1, a)²`.
fn scaled_one_minus_sq(ln_a: f64) -> f64 {
    if ln_a > 0.0 {
        (-2.0 * ln_a).exp_m1()
    } else {
        -(2.0 * ln_a).exp_m1()
    }
}

/// `(1 - a²)(1 - b²) / (1 - ab)²`, the first-order correction of `1/√R`.
fn curvature_ratio(ln_a: f64, ln_b: f64) -> f64 {
    let sa = ln_a.max(0.0);
    let sb = ln_b.max(0.0);
    let t = (-(sa + sb)).exp() * (ln_a + ln_b).exp_m1();
    scaled_one_minus_sq(ln_a) * scaled_one_minus_sq(ln_b) / (t * t)
}

/// Generating function of an adiabatically driven scale-invariant engine.
/// It depends on `(γ1, γ2)` only through `c = γ1/ε² + γ2 (1 - 1/ε²)`.
#[derive(Debug, Clone)]
pub struct ScaleInvariantCgf {
    engine: ScaleInvariantEngine,
    baths: BathPair,
    offset: f64,
}

impl ScaleInvariantCgf {
    pub fn new(engine: ScaleInvariantEngine, baths: BathPair) -> Self {
        let mut cgf = Self {
            engine,
            baths,
            offset: 0.0,
        };
        cgf.offset = cgf.ln_mgf(0.0).unwrap_or(0.0);
        cgf
    }

    fn ln_mgf(&self, c: f64) -> Option<f64> {
        let inv = 1.0 / self.engine.eps_sq();
        let cold_beta = self.baths.beta_c() + c;
        let hot_beta = self.baths.beta_h() * inv - c;
        if self.engine.is_unbounded() && !(cold_beta > 0.0 && hot_beta > 0.0) {
            return None;
        }
        let levels = self.engine.spectrum();
        let cold = log_sum_exp(levels.iter().map(|e| -cold_beta * e));
        let hot = log_sum_exp(levels.iter().map(|e| -hot_beta * e));
        Some(cold + hot)
    }

    /// The single combination of `(γ1, γ2)` the function depends on.
    pub fn invariant(&self, g1: f64, g2: f64) -> f64 {
        let inv = 1.0 / self.engine.eps_sq();
        g1 * inv + g2 * (1.0 - inv)
    }
}

impl Cgf for ScaleInvariantCgf {
    fn eval(&self, g1: f64, g2: f64) -> CgfValue {
        match self.ln_mgf(self.invariant(g1, g2)) {
            Some(v) => CgfValue::from_log(v - self.offset, UndefinedReason::SpectralSumDivergent),
            None => CgfValue::Undefined(UndefinedReason::SpectralSumDivergent),
        }
    }

    fn min_quantum(&self) -> f64 {
        let s = self.engine.min_spacing();
        if s.is_finite() {
            s
        } else {
            self.engine.spectrum()[0].abs().max(1.0)
        }
    }

    fn eta_carnot(&self) -> Option<f64> {
        Some(self.baths.eta_carnot())
    }
}

/// Brute-force `ln Σ p · exp(γ1 q2 + γ2 w)` over the atoms of a distribution.
#[derive(Debug, Clone)]
pub struct DistributionCgf<'a> {
    dist: &'a JointDistribution,
    quantum: f64,
}

impl<'a> DistributionCgf<'a> {
    pub fn new(dist: &'a JointDistribution) -> Result<Self> {
        if dist.atoms().is_empty() {
            return Err(param("dist", "distribution has no atoms"));
        }
        let quantum = dist
            .atoms()
            .iter()
            .flat_map(|a| [a.q2.abs(), a.w.abs()])
            .filter(|v| *v > 1e-12)
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            dist,
            quantum: if quantum.is_finite() { quantum } else { 1.0 },
        })
    }
}

impl Cgf for DistributionCgf<'_> {
    fn eval(&self, g1: f64, g2: f64) -> CgfValue {
        let v = log_sum_exp(
            self.dist
                .atoms()
                .iter()
                .filter(|a| a.p > 0.0)
                .map(|a| a.p.ln() + g1 * a.q2 + g2 * a.w),
        );
        CgfValue::from_log(v, UndefinedReason::SeriesDivergent)
    }

    fn min_quantum(&self) -> f64 {
        self.quantum
    }
}

pub fn cgf_two_level(g1: f64, g2: f64, engine: &TwoLevelEngine, baths: &BathPair) -> CgfValue {
    TwoLevelCgf::new(*engine, *baths, Expansion::Exact).eval(g1, g2)
}

pub fn cgf_two_level_linear(g1: f64, g2: f64, engine: &TwoLevelEngine, baths: &BathPair) -> CgfValue {
    TwoLevelCgf::new(*engine, *baths, Expansion::Linear).eval(g1, g2)
}

pub fn cgf_harmonic(g1: f64, g2: f64, engine: &HarmonicEngine, baths: &BathPair) -> CgfValue {
    HarmonicCgf::new(*engine, *baths, Expansion::Exact).eval(g1, g2)
}

pub fn cgf_harmonic_linear(g1: f64, g2: f64, engine: &HarmonicEngine, baths: &BathPair) -> CgfValue {
    HarmonicCgf::new(*engine, *baths, Expansion::Linear).eval(g1, g2)
}

pub fn cgf_scale_invariant(g1: f64, g2: f64, engine: &ScaleInvariantEngine, baths: &BathPair) -> CgfValue {
    ScaleInvariantCgf::new(engine.clone(), *baths).eval(g1, g2)
}

pub fn cgf_from_distribution(g1: f64, g2: f64, dist: &JointDistribution) -> Result<CgfValue> {
    Ok(DistributionCgf::new(dist)?.eval(g1, g2))
}
