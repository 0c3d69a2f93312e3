//! Exact per-cycle joint distribution of heat input `Q2` and total work `W`
//! from the two-projective-measurement chain
//! expansion `n -> m`, hot isochore `m -> k`, compression `k -> l`.

use std::io::Write;

use serde::Serialize;

use crate::engines::{
    gibbs, thermal_weights_truncated, BathPair, EngineModel, HarmonicEngine, ScaleInvariantEngine,
    ThermalWeights, TwoLevelEngine,
};
use crate::error::{param, Error, Result};
use crate::export::fmt_num;
use crate::numeric::compensated_sum;
use crate::par;
use crate::series::BiSeries;

/// Default probability mass a truncated distribution may drop.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;

/// Occupations below this are skipped during construction and booked as tail.
const PRUNE: f64 = 1e-30;

/// Negative series coefficients smaller than this in magnitude are rounding noise.
const NEGATIVE_COEFFICIENT_TOLERANCE: f64 = 1e-12;

/// Largest truncation tried when sizing a harmonic distribution automatically.
const MAX_AUTO_LEVELS: usize = 1024;

/// Stroke transition probabilities `P_{n -> m}` on a truncated level set.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    entries: Vec<f64>,
    q_star: f64,
}

impl TransitionMatrix {
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self {
            n,
            entries,
            q_star: 1.0,
        }
    }

    /// `[[u, 1-u], [1-u, u]]`.
    pub fn two_level(u: f64) -> Self {
        let v = 1.0 - u;
        Self {
            n: 2,
            entries: vec![u, v, v, u],
            q_star: 2.0 * u - 1.0,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.n
    }

    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.entries[from * self.n..(from + 1) * self.n]
    }

    pub fn row_sum(&self, from: usize) -> f64 {
        compensated_sum(self.row(from).iter().copied())
    }

    pub fn col_sum(&self, to: usize) -> f64 {
        compensated_sum((0..self.n).map(|i| self.get(i, to)))
    }
}

/// Transition probabilities of the driven oscillator, read off as the Taylor
/// coefficients of the generating function
/// `Σ a^n b^m P_{n->m} = √2 / √(Q*(1-a²)(1-b²) + (1+a²)(1+b²) - 4ab)`.
pub fn harmonic_transitions(q_star: f64, n_levels: usize) -> Result<TransitionMatrix> {
    if !(q_star.is_finite() && q_star >= 1.0) {
        return Err(param("q_star", format!("harmonic adiabaticity must be >= 1, got {q_star}")));
    }
    if n_levels < 2 {
        return Err(param("n_levels", format!("need at least 2 levels, got {n_levels}")));
    }
    if q_star == 1.0 {
        // The radicand collapses to 2(1 - ab)².
        return Ok(TransitionMatrix::identity(n_levels));
    }
    let s = q_star + 1.0;
    let kappa = (1.0 - q_star) / s;
    let radicand = BiSeries::from_terms(
        n_levels,
        &[(0, 0, 1.0), (2, 0, kappa), (0, 2, kappa), (1, 1, -4.0 / s), (2, 2, 1.0)],
    );
    let series = radicand.inv_sqrt()?;
    let prefactor = (2.0 / s).sqrt();
    let mut entries = vec![0.0; n_levels * n_levels];
    for n in 0..n_levels {
        for m in 0..n_levels {
            if (n + m) % 2 == 1 {
                continue;
            }
            let p = prefactor * series.get(n, m);
            if p < 0.0 {
                if p < -NEGATIVE_COEFFICIENT_TOLERANCE {
                    return Err(Error::NumericalInstability {
                        row: n,
                        col: m,
                        value: p,
                    });
                }
                continue;
            }
            entries[n * n_levels + m] = p;
        }
    }
    Ok(TransitionMatrix {
        n: n_levels,
        entries,
        q_star,
    })
}

/// Thermal occupations and stroke transitions of one engine, truncated to a
/// finite level set. Shared by the distribution builders and the sampler.
#[derive(Debug, Clone)]
pub struct MeasurementChain {
    pub weights: ThermalWeights,
    pub expansion: TransitionMatrix,
    pub compression: TransitionMatrix,
    /// `(cold quantum, hot quantum)` for equally spaced spectra.
    pub quanta: Option<(f64, f64)>,
}

impl MeasurementChain {
    pub fn new(engine: &EngineModel, baths: &BathPair, levels: Option<usize>, tail: f64) -> Result<Self> {
        let weights = thermal_weights_truncated(engine, baths, levels, tail)?;
        let chain = match engine {
            EngineModel::TwoLevel(e) => Self {
                weights,
                expansion: TransitionMatrix::two_level(e.u()),
                compression: TransitionMatrix::two_level(e.u()),
                quanta: Some((2.0 * e.nu0(), 2.0 * e.nu_tau())),
            },
            EngineModel::Harmonic(e) => {
                let t = harmonic_transitions(e.q_star(), weights.cold.len())?;
                Self {
                    weights,
                    compression: t.clone(),
                    expansion: t,
                    quanta: Some((e.omega0(), e.omega_tau())),
                }
            }
            EngineModel::ScaleInvariant(e) => {
                let n = e.spectrum().len();
                Self {
                    weights,
                    expansion: TransitionMatrix::identity(n),
                    compression: TransitionMatrix::identity(n),
                    quanta: None,
                }
            }
        };
        Ok(chain)
    }

    pub fn n_levels(&self) -> usize {
        self.weights.cold.len()
    }

    /// Probability lost to Gibbs truncation, transition-row deficits and pruning.
    pub fn tail_mass(&self) -> f64 {
        let deficit = |weights: &[f64], tail: f64, t: &TransitionMatrix| {
            tail + compensated_sum(weights.iter().enumerate().map(|(i, &p)| {
                if p < PRUNE {
                    p
                } else {
                    p * (1.0 - t.row_sum(i)).max(0.0)
                }
            }))
        };
        let cold = deficit(&self.weights.cold, self.weights.cold_tail, &self.expansion);
        let hot = deficit(&self.weights.hot, self.weights.hot_tail, &self.compression);
        cold + (1.0 - cold) * hot
    }
}

/// One `(Q2, W)` outcome of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub q2: f64,
    pub w: f64,
    pub p: f64,
}

/// Finite list of `(Q2, W, p)` atoms sorted by `(Q2, W)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    atoms: Vec<Atom>,
    tail_mass: f64,
}

impl JointDistribution {
    /// Sorts the atoms and merges exact duplicates.
    pub fn from_atoms(mut atoms: Vec<Atom>, tail_mass: f64) -> Result<Self> {
        if atoms.iter().any(|a| !(a.p >= 0.0) || !a.q2.is_finite() || !a.w.is_finite()) {
            return Err(param("atoms", "probabilities must be non-negative and energies finite"));
        }
        atoms.sort_by(|a, b| a.q2.total_cmp(&b.q2).then(a.w.total_cmp(&b.w)));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.q2 == a.q2 && last.w == a.w => last.p += a.p,
                _ => merged.push(a),
            }
        }
        merged.retain(|a| a.p > 0.0);
        Ok(Self {
            atoms: merged,
            tail_mass,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn total_probability(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.p))
    }

    /// CSV with header `q2,w,p`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "q2,w,p")?;
        for a in &self.atoms {
            writeln!(out, "{},{},{}", fmt_num(a.q2), fmt_num(a.w), fmt_num(a.p))?;
        }
        Ok(())
    }
}

/// Sixteen measurement outcomes of the two-level cycle, merged by `(Q2, W)`.
pub fn build_joint_two_level(engine: &TwoLevelEngine, baths: &BathPair) -> JointDistribution {
    let chain = MeasurementChain::new(&EngineModel::TwoLevel(*engine), baths, None, 0.0)
        .expect("two-level chain has no truncation");
    build_ladder(&chain).expect("two-level atoms are valid")
}

/// Harmonic cycle truncated to `n_levels` per spectrum, with the default
/// tail tolerance.
pub fn build_joint_harmonic(engine: &HarmonicEngine, baths: &BathPair, n_levels: usize) -> Result<JointDistribution> {
    build_joint_harmonic_with(engine, baths, n_levels, DEFAULT_TAIL_TOLERANCE)
}

pub fn build_joint_harmonic_with(
    engine: &HarmonicEngine,
    baths: &BathPair,
    n_levels: usize,
    tail: f64,
) -> Result<JointDistribution> {
    let chain = MeasurementChain::new(&EngineModel::Harmonic(*engine), baths, Some(n_levels), tail)?;
    let dist = build_ladder(&chain)?;
    if dist.tail_mass > tail {
        return Err(Error::Truncation {
            levels: n_levels,
            required: n_levels * 3 / 2,
            achieved: dist.tail_mass,
            tolerance: tail,
        });
    }
    Ok(dist)
}

/// Smallest harmonic truncation (growing by half each try) whose total tail
/// meets `tail`.
pub fn build_joint_harmonic_auto(engine: &HarmonicEngine, baths: &BathPair, tail: f64) -> Result<JointDistribution> {
    let mut levels = engine.levels_for(baths, tail / 10.0);
    loop {
        match build_joint_harmonic_with(engine, baths, levels, tail) {
            Err(Error::Truncation { .. }) if levels < MAX_AUTO_LEVELS => levels = (levels * 3 / 2).min(MAX_AUTO_LEVELS),
            other => return other,
        }
    }
}

/// Adiabatic scale-invariant cycle: atoms indexed by `(n, k)` with
/// `Q2 = (E_k - E_n)/ε²` and `W = -(1 - ε²) Q2`.
pub fn build_joint_adiabatic_scale_invariant(engine: &ScaleInvariantEngine, baths: &BathPair) -> JointDistribution {
    let levels = engine.spectrum();
    let cold = gibbs(levels, baths.beta_c());
    let hot = gibbs(&engine.scaled_spectrum(), baths.beta_h());
    let eta = engine.eta_th();
    let inv = 1.0 / engine.eps_sq();
    let mut atoms = Vec::with_capacity(levels.len() * levels.len());
    for (n, &pn) in cold.iter().enumerate() {
        for (k, &pk) in hot.iter().enumerate() {
            let q2 = (levels[k] - levels[n]) * inv;
            atoms.push(Atom {
                q2,
                w: -eta * q2,
                p: pn * pk,
            });
        }
    }
    JointDistribution::from_atoms(atoms, 0.0).expect("scale-invariant atoms are valid")
}

/// Builds the merged distribution of an equally spaced chain. With
/// `d1 = k - m` and `d2 = l - n`, `Q2 = ħω_τ d1` and `W = -ħω_τ d1 + ħω_0 d2`,
/// so atoms are keyed by integer pairs.
pub fn build_ladder(chain: &MeasurementChain) -> Result<JointDistribution> {
    let (cq, hq) = chain
        .quanta
        .ok_or_else(|| param("chain", "ladder construction needs equally spaced spectra"))?;
    let n = chain.n_levels();
    let width = 2 * n - 1;
    let off = n as isize - 1;
    let cold = &chain.weights.cold;
    let hot = &chain.weights.hot;
    let t_exp = &chain.expansion;
    let t_com = &chain.compression;

    // hot_to[l][k] = P_k^τ P_{k -> l}
    let hot_to: Vec<Vec<f64>> = (0..n)
        .map(|l| {
            (0..n)
                .map(|k| if hot[k] < PRUNE { 0.0 } else { hot[k] * t_com.get(k, l) })
                .collect()
        })
        .collect();

    let rows: Vec<Vec<f64>> = par::map_range(0..width, |row| {
        let d2 = row as isize - off;
        let mut acc = vec![0.0; width];
        #[allow(clippy::needless_range_loop)]
        for ni in 0..n {
            let l = ni as isize + d2;
            if l < 0 || l >= n as isize || cold[ni] < PRUNE {
                continue;
            }
            let column = &hot_to[l as usize];
            for (m, &t) in t_exp.row(ni).iter().enumerate() {
                if t == 0.0 {
                    continue;
                }
                let a = cold[ni] * t;
                let base = off - m as isize;
                for (k, &b) in column.iter().enumerate() {
                    if b != 0.0 {
                        acc[(base + k as isize) as usize] += a * b;
                    }
                }
            }
        }
        acc
    });

    let mut atoms = Vec::new();
    for (row, acc) in rows.iter().enumerate() {
        let d2 = row as f64 - off as f64;
        for (col, &p) in acc.iter().enumerate() {
            if p > 0.0 {
                let d1 = col as f64 - off as f64;
                atoms.push(Atom {
                    q2: hq * d1,
                    w: -hq * d1 + cq * d2,
                    p,
                });
            }
        }
    }
    JointDistribution::from_atoms(atoms, chain.tail_mass())
}

/// Pearson coefficient, or a flag when either variance vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pearson {
    Value(f64),
    Degenerate,
}

impl Pearson {
    pub fn value(self) -> Option<f64> {
        match self {
            Pearson::Value(v) => Some(v),
            Pearson::Degenerate => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSummary {
    pub mean_q2: f64,
    pub mean_w: f64,
    pub var_q2: f64,
    pub var_w: f64,
    pub cov_qw: f64,
    pub pearson: Pearson,
    /// `-⟨W⟩/⟨Q2⟩`, absent when `⟨Q2⟩ = 0`.
    pub eta_macroscopic: Option<f64>,
}

impl MomentSummary {
    /// Heat-engine sign conditions `⟨Q2⟩ ≥ 0 ≥ ⟨W⟩`.
    pub fn is_engine(&self) -> bool {
        self.mean_q2 >= 0.0 && self.mean_w <= 0.0
    }
}

/// Exact weighted moments of the retained atoms (two-pass, compensated).
pub fn moments(dist: &JointDistribution) -> Result<MomentSummary> {
    let atoms = dist.atoms();
    if atoms.is_empty() {
        return Err(param("dist", "distribution has no atoms"));
    }
    let total = dist.total_probability();
    let mean_q2 = compensated_sum(atoms.iter().map(|a| a.p * a.q2)) / total;
    let mean_w = compensated_sum(atoms.iter().map(|a| a.p * a.w)) / total;
    let var_q2 = compensated_sum(atoms.iter().map(|a| a.p * (a.q2 - mean_q2).powi(2))) / total;
    let var_w = compensated_sum(atoms.iter().map(|a| a.p * (a.w - mean_w).powi(2))) / total;
    let cov_qw = compensated_sum(atoms.iter().map(|a| a.p * (a.q2 - mean_q2) * (a.w - mean_w))) / total;
    let scale_q = atoms.iter().map(|a| a.q2.abs()).fold(0.0, f64::max);
    let scale_w = atoms.iter().map(|a| a.w.abs()).fold(0.0, f64::max);
    Ok(summarize([mean_q2, mean_w, var_q2, var_w, cov_qw], scale_q, scale_w))
}

fn summarize([mean_q2, mean_w, var_q2, var_w, cov_qw]: [f64; 5], scale_q: f64, scale_w: f64) -> MomentSummary {
    let negligible = |var: f64, scale: f64| var <= (1e-14 * scale).powi(2);
    let pearson = if negligible(var_q2, scale_q) || negligible(var_w, scale_w) {
        Pearson::Degenerate
    } else {
        Pearson::Value((cov_qw / (var_q2.sqrt() * var_w.sqrt())).clamp(-1.0, 1.0))
    };
    let eta_macroscopic = (mean_q2 != 0.0).then(|| -mean_w / mean_q2);
    MomentSummary {
        mean_q2,
        mean_w,
        var_q2,
        var_w,
        cov_qw,
        pearson,
        eta_macroscopic,
    }
}

/// Moments of an equally spaced chain without building the joint law.
///
/// The cold pair `(n, m)` and the hot pair `(k, l)` are independent, so
/// with `Q2 = ħω_τ(k - m)` and `W = ħω_τ(m - k) + ħω_0(l - n)` every
/// second moment follows from pair sums in `O(N²)`. Pruning and
/// normalization match [`build_ladder`].
pub fn chain_moments(chain: &MeasurementChain) -> Result<MomentSummary> {
    let (cq, hq) = chain
        .quanta
        .ok_or_else(|| param("chain", "pair moments need equally spaced spectra"))?;
    let n = chain.n_levels();
    // Pair law p(i) T(i -> j) with the first index scaled by `first` and the
    // second by `hq`: returns mass, means and second central moments.
    let pair = |weights: &[f64], t: &TransitionMatrix, first: f64, from_hot: bool| {
        let terms = || {
            (0..n).filter(move |&i| weights[i] >= PRUNE).flat_map(move |i| {
                t.row(i).iter().enumerate().filter(|(_, &p)| p != 0.0).map(move |(j, &p)| {
                    let w = weights[i] * p;
                    // hot pair: (k, l) = (i, j); cold pair: (n, m) = (i, j)
                    let (x, y) = if from_hot {
                        (hq * i as f64, first * j as f64)
                    } else {
                        (hq * j as f64, first * i as f64)
                    };
                    (w, x, y)
                })
            })
        };
        let mass = compensated_sum(terms().map(|(w, _, _)| w));
        let mx = compensated_sum(terms().map(|(w, x, _)| w * x)) / mass;
        let my = compensated_sum(terms().map(|(w, _, y)| w * y)) / mass;
        let vxx = compensated_sum(terms().map(|(w, x, _)| w * (x - mx).powi(2))) / mass;
        let vyy = compensated_sum(terms().map(|(w, _, y)| w * (y - my).powi(2))) / mass;
        let vxy = compensated_sum(terms().map(|(w, x, y)| w * (x - mx) * (y - my))) / mass;
        (mass, [mx, my, vxx, vyy, vxy])
    };
    // cold: x = ħω_τ m, y = ħω_0 n; hot: x = ħω_τ k, y = ħω_0 l
    let (cold_mass, [m, nn, vmm, vnn, vmn]) = pair(&chain.weights.cold, &chain.expansion, cq, false);
    let (hot_mass, [k, l, vkk, vll, vkl]) = pair(&chain.weights.hot, &chain.compression, cq, true);
    if !(cold_mass > 0.0 && hot_mass > 0.0) {
        return Err(param("chain", "chain carries no probability"));
    }
    let mean_q2 = k - m;
    let mean_w = (m - k) + (l - nn);
    let var_q2 = vkk + vmm;
    // W = (m - n) + (l - k) in scaled units
    let var_w = (vmm + vnn - 2.0 * vmn) + (vll + vkk - 2.0 * vkl);
    let cov_qw = (vkl - vkk) - (vmm - vmn);
    let top = (n - 1) as f64;
    Ok(summarize(
        [mean_q2, mean_w, var_q2, var_w, cov_qw],
        hq * top,
        (hq + cq) * top,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baths() -> BathPair {
        BathPair::new(3.0, 0.1).unwrap()
    }

    #[test]
    fn adiabatic_transitions_are_identity() {
        let t = harmonic_transitions(1.0, 16).unwrap();
        for n in 0..16 {
            for m in 0..16 {
                assert_eq!(t.get(n, m), if n == m { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn ground_to_ground_probability() {
        for q in [1.05, 1.2, 2.0, 5.0] {
            let t = harmonic_transitions(q, 8).unwrap();
            assert!((t.get(0, 0) - (2.0 / (q + 1.0)).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn ground_row_is_binomial_series() {
        // ((Q+1) + (1-Q) b²)^{-1/2}: P_{0->2j} = √(2/(Q+1)) C(2j,j) (κ/4)^j with κ = (Q-1)/(Q+1)
        let q = 1.2;
        let t = harmonic_transitions(q, 20).unwrap();
        let kappa = (q - 1.0) / (q + 1.0);
        let mut c = (2.0 / (q + 1.0)).sqrt();
        for j in 0..10 {
            assert!((t.get(0, 2 * j) - c).abs() < 1e-14, "j={j}");
            assert_eq!(t.get(0, 2 * j + 1), 0.0);
            c *= kappa * (2 * j + 1) as f64 / (2 * j + 2) as f64;
        }
    }

    #[test]
    fn transitions_reject_bad_input() {
        assert!(harmonic_transitions(0.9, 8).is_err());
        assert!(harmonic_transitions(1.2, 1).is_err());
    }

    #[test]
    fn two_level_probabilities_complete() {
        let e = TwoLevelEngine::new(1.0, 2.0, 0.95).unwrap();
        let d = build_joint_two_level(&e, &baths());
        assert!(d.atoms().len() <= 9);
        assert!((d.total_probability() - 1.0).abs() < 1e-15);
        assert_eq!(d.tail_mass(), 0.0);
    }

    #[test]
    fn two_level_adiabatic_support_on_line() {
        let e = TwoLevelEngine::new(1.0, 2.0, 1.0).unwrap();
        let d = build_joint_two_level(&e, &baths());
        assert_eq!(d.atoms().len(), 3);
        for a in d.atoms() {
            assert_eq!(a.w, -e.eta_th() * a.q2);
        }
        let m = moments(&d).unwrap();
        assert!((m.pearson.value().unwrap() + 1.0).abs() < 1e-12);
        assert!(m.is_engine());
    }

    #[test]
    fn single_atom_is_degenerate() {
        let d = JointDistribution::from_atoms(vec![Atom { q2: 1.0, w: -0.5, p: 1.0 }], 0.0).unwrap();
        let m = moments(&d).unwrap();
        assert_eq!(m.var_q2, 0.0);
        assert_eq!(m.var_w, 0.0);
        assert_eq!(m.pearson, Pearson::Degenerate);
        assert_eq!(m.eta_macroscopic, Some(0.5));
    }

    #[test]
    fn duplicates_merge() {
        let a = Atom { q2: 1.0, w: 2.0, p: 0.25 };
        let b = Atom { q2: -1.0, w: 0.0, p: 0.5 };
        let d = JointDistribution::from_atoms(vec![a, b, a], 0.0).unwrap();
        assert_eq!(d.atoms().len(), 2);
        assert_eq!(d.atoms()[0], b);
        assert_eq!(d.atoms()[1].p, 0.5);
        assert!(moments(&JointDistribution::from_atoms(vec![], 0.0).unwrap()).is_err());
    }

    #[test]
    fn scale_invariant_two_level_matches_adiabatic_two_level() {
        let si = ScaleInvariantEngine::two_level(1.0, 2.0).unwrap();
        let a = build_joint_adiabatic_scale_invariant(&si, &baths());
        let tl = TwoLevelEngine::new(1.0, 2.0, 1.0).unwrap();
        let b = build_joint_two_level(&tl, &baths());
        assert_eq!(a.atoms().len(), b.atoms().len());
        for (x, y) in a.atoms().iter().zip(b.atoms()) {
            assert!((x.q2 - y.q2).abs() < 1e-12);
            assert!((x.w - y.w).abs() < 1e-12);
            assert!((x.p - y.p).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_adiabatic_support_on_line() {
        let e = HarmonicEngine::new(1.0, 2.0, 1.0).unwrap();
        let d = build_joint_harmonic(&e, &baths(), 160).unwrap();
        for a in d.atoms() {
            assert!((a.w + e.eta_th() * a.q2).abs() <= 1e-10 * a.q2.abs().max(1.0));
        }
        assert!((d.total_probability() + d.tail_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_truncation_reported() {
        let e = HarmonicEngine::new(1.0, 2.0, 1.2).unwrap();
        assert!(matches!(build_joint_harmonic(&e, &baths(), 64), Err(Error::Truncation { .. })));
    }

    #[test]
    fn csv_layout() {
        let e = TwoLevelEngine::new(1.0, 2.0, 1.0).unwrap();
        let d = build_joint_two_level(&e, &baths());
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("q2,w,p"));
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn pair_moments_match_joint_law() {
        let b = baths();
        let engines = [
            EngineModel::from(TwoLevelEngine::new(1.0, 2.0, 0.95).unwrap()),
            EngineModel::from(HarmonicEngine::new(1.0, 2.0, 1.3).unwrap()),
        ];
        for engine in &engines {
            let chain = MeasurementChain::new(engine, &b, None, 1e-6).unwrap();
            let full = moments(&build_ladder(&chain).unwrap()).unwrap();
            let fast = chain_moments(&chain).unwrap();
            let pairs = [
                (full.mean_q2, fast.mean_q2),
                (full.mean_w, fast.mean_w),
                (full.var_q2, fast.var_q2),
                (full.var_w, fast.var_w),
                (full.cov_qw, fast.cov_qw),
                (full.pearson.value().unwrap(), fast.pearson.value().unwrap()),
            ];
            for (a, f) in pairs {
                assert!((a - f).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {f}");
            }
        }
    }
}
