//! Working-medium models for the Otto cycle.
//!
//! Energies use `k = ħ = 1`. Two-level eigenvalues are `±ν` (gap `2ν`),
//! harmonic eigenvalues are `ω(n + 1/2)`.

use serde::Serialize;

use crate::error::{param, Error, Result};

/// Default Gibbs tail mass tolerated when truncating an infinite spectrum.
pub const DEFAULT_GIBBS_TAIL: f64 = 1e-12;

/// Smallest truncation used for harmonic spectra.
pub const MIN_HARMONIC_LEVELS: usize = 64;

/// Inverse temperatures of the cold and hot reservoirs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BathPair {
    beta_c: f64,
    beta_h: f64,
}

impl BathPair {
    pub fn new(beta_c: f64, beta_h: f64) -> Result<Self> {
        if !(beta_h.is_finite() && beta_h > 0.0) {
            return Err(param("beta_h", format!("must be positive and finite, got {beta_h}")));
        }
        if !(beta_c.is_finite() && beta_c > beta_h) {
            return Err(param(
                "beta_c",
                format!("cold bath must be colder than the hot bath (beta_c > beta_h = {beta_h}), got {beta_c}"),
            ));
        }
        Ok(Self { beta_c, beta_h })
    }

    pub fn beta_c(&self) -> f64 {
        self.beta_c
    }

    pub fn beta_h(&self) -> f64 {
        self.beta_h
    }

    /// `1 - β_h / β_c`.
    pub fn eta_carnot(&self) -> f64 {
        1.0 - self.beta_h / self.beta_c
    }
}

/// Spin-1/2 working medium with half gaps `nu0 -> nu_tau` and no-transition
/// probability `u` for each driving stroke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoLevelEngine {
    nu0: f64,
    nu_tau: f64,
    u: f64,
}

impl TwoLevelEngine {
    pub fn new(nu0: f64, nu_tau: f64, u: f64) -> Result<Self> {
        check_expansion("nu0", nu0, "nu_tau", nu_tau)?;
        if !(0.0..=1.0).contains(&u) {
            return Err(param("u", format!("probability must lie in [0, 1], got {u}")));
        }
        Ok(Self { nu0, nu_tau, u })
    }

    /// Builds the engine from the adiabaticity `Q* = 2u - 1`.
    pub fn with_q_star(nu0: f64, nu_tau: f64, q_star: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&q_star) {
            return Err(param("q_star", format!("two-level adiabaticity must lie in [-1, 1], got {q_star}")));
        }
        Self::new(nu0, nu_tau, (q_star + 1.0) / 2.0)
    }

    /// Builds the engine from the linear field ramp `λ1 -> λ2` over `τ`.
    pub fn from_drive(nu0: f64, nu_tau: f64, lambda1: f64, lambda2: f64, tau: f64) -> Result<Self> {
        Self::new(nu0, nu_tau, tls_no_transition_prob(lambda1, lambda2, tau)?)
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    pub fn nu_tau(&self) -> f64 {
        self.nu_tau
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        1.0 - self.u
    }

    pub fn q_star(&self) -> f64 {
        2.0 * self.u - 1.0
    }

    pub fn eps_sq(&self) -> f64 {
        self.nu0 / self.nu_tau
    }

    pub fn eta_th(&self) -> f64 {
        1.0 - self.eps_sq()
    }

    pub fn is_adiabatic(&self) -> bool {
        self.u == 1.0
    }

    /// Same engine with a different no-transition probability.
    pub fn with_u(&self, u: f64) -> Result<Self> {
        Self::new(self.nu0, self.nu_tau, u)
    }
}

/// Harmonic oscillator working medium driven `omega0 -> omega_tau` with
/// adiabaticity `q_star` (1 for adiabatic driving).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicEngine {
    omega0: f64,
    omega_tau: f64,
    q_star: f64,
}

impl HarmonicEngine {
    pub fn new(omega0: f64, omega_tau: f64, q_star: f64) -> Result<Self> {
        check_expansion("omega0", omega0, "omega_tau", omega_tau)?;
        if !(q_star.is_finite() && q_star >= 1.0) {
            return Err(param("q_star", format!("harmonic adiabaticity must be >= 1, got {q_star}")));
        }
        Ok(Self {
            omega0,
            omega_tau,
            q_star,
        })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omega_tau(&self) -> f64 {
        self.omega_tau
    }

    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    pub fn eps_sq(&self) -> f64 {
        self.omega0 / self.omega_tau
    }

    pub fn eta_th(&self) -> f64 {
        1.0 - self.eps_sq()
    }

    pub fn is_adiabatic(&self) -> bool {
        self.q_star == 1.0
    }

    pub fn with_q_star(&self, q_star: f64) -> Result<Self> {
        Self::new(self.omega0, self.omega_tau, q_star)
    }

    /// Levels needed so that both Gibbs tails fall below `tail`.
    pub fn levels_for(&self, baths: &BathPair, tail: f64) -> usize {
        let cold = geometric_levels(baths.beta_c() * self.omega0, tail);
        let hot = geometric_levels(baths.beta_h() * self.omega_tau, tail);
        cold.max(hot).max(MIN_HARMONIC_LEVELS)
    }
}

/// Adiabatically driven medium whose spectrum rescales as `E^τ = E^0 / ε²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleInvariantEngine {
    spectrum: Vec<f64>,
    eps_tau_sq: f64,
    unbounded: bool,
}

impl ScaleInvariantEngine {
    /// A finite spectrum, summed exactly.
    pub fn new(spectrum: Vec<f64>, eps_tau_sq: f64) -> Result<Self> {
        if spectrum.is_empty() {
            return Err(param("spectrum", "must contain at least one level"));
        }
        if spectrum.iter().any(|e| !e.is_finite()) {
            return Err(param("spectrum", "levels must be finite"));
        }
        if spectrum.windows(2).any(|w| w[1] <= w[0]) {
            return Err(param("spectrum", "levels must be strictly increasing"));
        }
        if !(eps_tau_sq > 0.0 && eps_tau_sq < 1.0) {
            return Err(param("eps_tau_sq", format!("must lie in (0, 1), got {eps_tau_sq}")));
        }
        Ok(Self {
            spectrum,
            eps_tau_sq,
            unbounded: false,
        })
    }

    /// Marks the spectrum as the truncation of an unbounded one, which
    /// restricts the generating function to its convergence domain.
    pub fn unbounded(mut self) -> Self {
        self.unbounded = true;
        self
    }

    /// `{-ν0, +ν0}` with `ε² = ν0/ν_τ`.
    pub fn two_level(nu0: f64, nu_tau: f64) -> Result<Self> {
        check_expansion("nu0", nu0, "nu_tau", nu_tau)?;
        Self::new(vec![-nu0, nu0], nu0 / nu_tau)
    }

    /// `ω0 (n + 1/2)` for `n < levels`, `ε² = ω0/ω_τ`.
    pub fn harmonic(omega0: f64, omega_tau: f64, levels: usize) -> Result<Self> {
        check_expansion("omega0", omega0, "omega_tau", omega_tau)?;
        let spectrum = (0..levels).map(|n| omega0 * (n as f64 + 0.5)).collect();
        Ok(Self::new(spectrum, omega0 / omega_tau)?.unbounded())
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn eps_sq(&self) -> f64 {
        self.eps_tau_sq
    }

    pub fn is_unbounded(&self) -> bool {
        self.unbounded
    }

    pub fn eta_th(&self) -> f64 {
        1.0 - self.eps_tau_sq
    }

    /// Spectrum after the expansion stroke.
    pub fn scaled_spectrum(&self) -> Vec<f64> {
        self.spectrum.iter().map(|e| e / self.eps_tau_sq).collect()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spectrum
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Any of the supported working media.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineModel {
    TwoLevel(TwoLevelEngine),
    Harmonic(HarmonicEngine),
    ScaleInvariant(ScaleInvariantEngine),
}

impl EngineModel {
    pub fn eps_sq(&self) -> f64 {
        match self {
            EngineModel::TwoLevel(e) => e.eps_sq(),
            EngineModel::Harmonic(e) => e.eps_sq(),
            EngineModel::ScaleInvariant(e) => e.eps_sq(),
        }
    }

    /// Nonadiabatic-to-adiabatic mean energy ratio.
    pub fn q_star(&self) -> f64 {
        match self {
            EngineModel::TwoLevel(e) => e.q_star(),
            EngineModel::Harmonic(e) => e.q_star(),
            EngineModel::ScaleInvariant(_) => 1.0,
        }
    }

    /// Smallest energy quantum exchanged in a stroke.
    pub fn min_quantum(&self) -> f64 {
        match self {
            EngineModel::TwoLevel(e) => 2.0 * e.nu0(),
            EngineModel::Harmonic(e) => e.omega0(),
            EngineModel::ScaleInvariant(e) => e.min_spacing(),
        }
    }
}

impl From<TwoLevelEngine> for EngineModel {
    fn from(e: TwoLevelEngine) -> Self {
        EngineModel::TwoLevel(e)
    }
}

impl From<HarmonicEngine> for EngineModel {
    fn from(e: HarmonicEngine) -> Self {
        EngineModel::Harmonic(e)
    }
}

impl From<ScaleInvariantEngine> for EngineModel {
    fn from(e: ScaleInvariantEngine) -> Self {
        EngineModel::ScaleInvariant(e)
    }
}

/// No-transition probability `cos² I` of the rotating-field drive with a
/// linear amplitude ramp `λ1 -> λ2`, where `I = -(λ1 + λ2) τ / 2`.
pub fn tls_no_transition_prob(lambda1: f64, lambda2: f64, tau: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(param("tau", format!("duration must be positive, got {tau}")));
    }
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
        return Err(param("lambda", "field amplitudes must be non-negative"));
    }
    let integral = -(lambda1 + lambda2) * tau / 2.0;
    let c = integral.cos();
    Ok((c * c).clamp(0.0, 1.0))
}

/// Normalized occupations at the start of each stroke.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalWeights {
    /// Levels at the start of expansion, `E_n^0`.
    pub cold_levels: Vec<f64>,
    /// `P_n^0(β_c)`.
    pub cold: Vec<f64>,
    /// Levels at the start of compression, `E_k^τ`.
    pub hot_levels: Vec<f64>,
    /// `P_k^τ(β_h)`.
    pub hot: Vec<f64>,
    /// Gibbs mass beyond the truncation (zero for finite spectra).
    pub cold_tail: f64,
    pub hot_tail: f64,
}

/// Thermal occupations with the default tail tolerance and adaptive
/// harmonic truncation.
pub fn thermal_weights(engine: &EngineModel, baths: &BathPair) -> Result<ThermalWeights> {
    thermal_weights_truncated(engine, baths, None, DEFAULT_GIBBS_TAIL)
}

/// Thermal occupations. Harmonic spectra are truncated at `levels`
/// (adaptive when `None`); the weights keep the exact partition function so
/// that the discarded mass shows up as `cold_tail` / `hot_tail`.
pub fn thermal_weights_truncated(
    engine: &EngineModel,
    baths: &BathPair,
    levels: Option<usize>,
    tail: f64,
) -> Result<ThermalWeights> {
    match engine {
        EngineModel::TwoLevel(e) => {
            let cold_levels = vec![-e.nu0(), e.nu0()];
            let hot_levels = vec![-e.nu_tau(), e.nu_tau()];
            Ok(ThermalWeights {
                cold: gibbs(&cold_levels, baths.beta_c()),
                hot: gibbs(&hot_levels, baths.beta_h()),
                cold_levels,
                hot_levels,
                cold_tail: 0.0,
                hot_tail: 0.0,
            })
        }
        EngineModel::ScaleInvariant(e) => {
            let cold_levels = e.spectrum().to_vec();
            let hot_levels = e.scaled_spectrum();
            Ok(ThermalWeights {
                cold: gibbs(&cold_levels, baths.beta_c()),
                hot: gibbs(&hot_levels, baths.beta_h()),
                cold_levels,
                hot_levels,
                cold_tail: 0.0,
                hot_tail: 0.0,
            })
        }
        EngineModel::Harmonic(e) => {
            let required = e.levels_for(baths, tail);
            let n = levels.unwrap_or(required);
            let (cold, cold_tail) = geometric_gibbs(baths.beta_c() * e.omega0(), n);
            let (hot, hot_tail) = geometric_gibbs(baths.beta_h() * e.omega_tau(), n);
            let achieved = cold_tail.max(hot_tail);
            if achieved > tail {
                return Err(Error::Truncation {
                    levels: n,
                    required,
                    achieved,
                    tolerance: tail,
                });
            }
            Ok(ThermalWeights {
                cold_levels: (0..n).map(|k| e.omega0() * (k as f64 + 0.5)).collect(),
                hot_levels: (0..n).map(|k| e.omega_tau() * (k as f64 + 0.5)).collect(),
                cold,
                hot,
                cold_tail,
                hot_tail,
            })
        }
    }
}

/// Adiabatic Otto efficiency `1 - ε²` and Carnot efficiency, as `(η_th, η_ca)`.
pub fn macroscopic_efficiencies(engine: &EngineModel, baths: &BathPair) -> (f64, f64) {
    (1.0 - engine.eps_sq(), baths.eta_carnot())
}

/// Boltzmann weights of a finite spectrum, shifted by the ground level so
/// the exponentials never overflow.
pub(crate) fn gibbs(levels: &[f64], beta: f64) -> Vec<f64> {
    let ground = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = levels.iter().map(|e| (-beta * (e - ground)).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// First `n` weights of the geometric distribution `(1 - r) r^k`, `r = e^{-x}`,
/// and the tail mass `r^n`.
fn geometric_gibbs(x: f64, n: usize) -> (Vec<f64>, f64) {
    let norm = -(-x).exp_m1();
    let weights = (0..n).map(|k| norm * (-x * k as f64).exp()).collect();
    (weights, (-x * n as f64).exp())
}

fn geometric_levels(x: f64, tail: f64) -> usize {
    (-tail.ln() / x).ceil().max(1.0) as usize
}

fn check_expansion(lo_name: &'static str, lo: f64, hi_name: &'static str, hi: f64) -> Result<()> {
    if !(lo.is_finite() && lo > 0.0) {
        return Err(param(lo_name, format!("must be positive, got {lo}")));
    }
    if !(hi.is_finite() && hi > lo) {
        return Err(param(hi_name, format!("expansion must widen the spectrum ({hi_name} > {lo_name} = {lo}), got {hi}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn drive_multiple_of_pi_is_adiabatic() {
        // (λ1 + λ2) τ / 2 = π
        let u = tls_no_transition_prob(1.0, 2.0 * PI - 1.0, 1.0).unwrap();
        assert!((u - 1.0).abs() < 1e-15);
        let u = tls_no_transition_prob(PI / 2.0, PI / 2.0, 1.0).unwrap();
        assert!(u < 1e-15);
        let u = tls_no_transition_prob(1.0, 2.0, 1.0).unwrap();
        assert!((u - 1.5f64.cos().powi(2)).abs() < 1e-15);
        assert!((u - 0.00500).abs() < 1e-5);
    }

    #[test]
    fn drive_rejects_nonpositive_duration() {
        assert!(tls_no_transition_prob(1.0, 1.0, 0.0).is_err());
        assert!(tls_no_transition_prob(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn bath_order_enforced() {
        assert!(BathPair::new(0.1, 3.0).is_err());
        assert!(BathPair::new(3.0, 0.0).is_err());
        let b = BathPair::new(3.0, 0.1).unwrap();
        assert!((b.eta_carnot() - 29.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn engine_invariants() {
        assert!(TwoLevelEngine::new(2.0, 1.0, 0.5).is_err());
        assert!(TwoLevelEngine::new(1.0, 2.0, 1.1).is_err());
        assert!(HarmonicEngine::new(1.0, 2.0, 0.99).is_err());
        assert!(ScaleInvariantEngine::new(vec![1.0, 1.0], 0.5).is_err());
        assert!(ScaleInvariantEngine::new(vec![0.0, 1.0], 1.0).is_err());
        let tl = TwoLevelEngine::with_q_star(1.0, 2.0, 0.9).unwrap();
        assert!((tl.u() - 0.95).abs() < 1e-15);
        assert!((tl.q_star() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn two_level_gibbs_weights() {
        let baths = BathPair::new(3.0, 0.1).unwrap();
        let e = EngineModel::from(TwoLevelEngine::new(1.0, 2.0, 1.0).unwrap());
        let w = thermal_weights(&e, &baths).unwrap();
        let expected = 3f64.exp() / (3f64.exp() + (-3f64).exp());
        assert!((w.cold[0] - expected).abs() < 1e-15);
        assert!((w.cold[0] - 0.99753).abs() < 1e-5);
        assert!((w.cold.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((w.hot.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let frozen = BathPair::new(1e3, 0.1).unwrap();
        let w = thermal_weights(&e, &frozen).unwrap();
        assert!((w.cold[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_gibbs_is_geometric() {
        let baths = BathPair::new(3.0, 0.1).unwrap();
        let e = EngineModel::from(HarmonicEngine::new(1.0, 2.0, 1.2).unwrap());
        let w = thermal_weights(&e, &baths).unwrap();
        assert!(w.cold.len() >= MIN_HARMONIC_LEVELS);
        for pair in w.hot.windows(2).take(50) {
            assert!((pair[1] / pair[0] - (-0.2f64).exp()).abs() < 1e-13);
        }
        let total: f64 = w.hot.iter().sum::<f64>() + w.hot_tail;
        assert!((total - 1.0).abs() < 1e-12);
        assert!(w.hot_tail <= DEFAULT_GIBBS_TAIL);
    }

    #[test]
    fn harmonic_truncation_too_small() {
        let baths = BathPair::new(3.0, 0.1).unwrap();
        let e = EngineModel::from(HarmonicEngine::new(1.0, 2.0, 1.0).unwrap());
        match thermal_weights_truncated(&e, &baths, Some(32), 1e-12) {
            Err(Error::Truncation { required, .. }) => assert_eq!(required, 139),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn gibbs_shift_invariant() {
        let levels = [0.3, 1.1, 2.0, 4.5];
        let shifted: Vec<f64> = levels.iter().map(|e| e + 17.25).collect();
        let a = gibbs(&levels, 0.7);
        let b = gibbs(&shifted, 0.7);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn efficiencies() {
        let baths = BathPair::new(3.0, 0.1).unwrap();
        let e = EngineModel::from(HarmonicEngine::new(1.0, 2.0, 1.0).unwrap());
        let (eta_th, eta_ca) = macroscopic_efficiencies(&e, &baths);
        assert_eq!(eta_th, 0.5);
        assert!((eta_ca - 0.9667).abs() < 1e-4);
        assert!(eta_th < eta_ca);
    }
}
