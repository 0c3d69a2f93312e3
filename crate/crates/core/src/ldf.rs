//! Large-deviation functions derived from a generating function.
//!
//! The efficiency rate function uses the one-dimensional form
//! `J(η) = -min_γ φ(ηγ, γ)`; the two-dimensional Legendre transform and its
//! contraction along `W = -η Q2` are provided as an independent route.

use std::io::{self, Write};

use serde::Serialize;

use crate::cgf::{Cgf, CgfValue, UndefinedReason};
use crate::error::{param, Error, Result};
use crate::export::fmt_num;
use crate::minimize::{bfgs_maximize, golden_section, AscentConfig};
use crate::par;

/// Below `-J_MAX` the line minimum is treated as unbounded.
pub const DEFAULT_J_MAX: f64 = 1e3;

/// Search window half-width, in units of `1 / min_quantum`.
pub const DEFAULT_WINDOW: f64 = 50.0;

/// Options for the one-dimensional search over `γ2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    /// Half-width `Γ` of the `γ2` window; `None` picks `50 / min_quantum`.
    pub half_width: Option<f64>,
    pub j_max: f64,
    /// Logarithmically spaced probes on each side of the origin.
    pub scan_points: usize,
    /// Smallest probed `|γ2|`, as a fraction of `Γ`.
    pub innermost: f64,
    /// Width of the final golden-section bracket.
    pub tolerance: f64,
    /// Relative change of `φ` along the adiabatic direction below which the
    /// generating function counts as degenerate.
    pub degeneracy_tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            half_width: None,
            j_max: DEFAULT_J_MAX,
            scan_points: 160,
            innermost: 1e-7,
            tolerance: 1e-10,
            degeneracy_tolerance: 1e-9,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.half_width {
            if !(g > 0.0 && g.is_finite()) {
                return Err(param("half_width", "must be positive and finite"));
            }
        }
        if !(self.j_max > 0.0) {
            return Err(param("j_max", "must be positive"));
        }
        if self.scan_points < 4 {
            return Err(param("scan_points", "need at least 4 probes per side"));
        }
        if !(self.innermost > 0.0 && self.innermost < 1.0) {
            return Err(param("innermost", "must lie in (0, 1)"));
        }
        if !(self.tolerance > 0.0) {
            return Err(param("tolerance", "must be positive"));
        }
        if !(self.degeneracy_tolerance > 0.0) {
            return Err(param("degeneracy_tolerance", "must be positive"));
        }
        Ok(())
    }

    fn window<C: Cgf + ?Sized>(&self, cgf: &C) -> f64 {
        self.half_width.unwrap_or(DEFAULT_WINDOW / cgf.min_quantum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateStatus {
    /// Interior minimum located to tolerance.
    Converged,
    /// The minimum sits on the edge of the search window; the value is a lower bound.
    BoundaryLimited,
    /// The line minimum fell below `-J_max`; reported as `+∞`.
    DivergedToMinusInfinity,
    /// The generating function is flat along the adiabatic direction, so every
    /// `η` other than the typical one is impossible; reported as `+∞`.
    Degenerate,
}

impl RateStatus {
    pub fn name(self) -> &'static str {
        match self {
            RateStatus::Converged => "converged",
            RateStatus::BoundaryLimited => "boundary-limited",
            RateStatus::DivergedToMinusInfinity => "diverged-to-minus-infinity",
            RateStatus::Degenerate => "degenerate",
        }
    }
}

/// `J(η)` together with where the line minimum was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub eta: f64,
    /// `J(η)`, `+∞` when the status says so.
    pub j: f64,
    /// Minimizing `γ2`; absent for a degenerate generating function.
    pub argmin_gamma2: Option<f64>,
    pub status: RateStatus,
}

impl RatePoint {
    pub fn is_infinite(&self) -> bool {
        self.j == f64::INFINITY
    }
}

/// Fourth-order central-difference gradient of `φ` at the origin, i.e.
/// `(⟨Q2⟩, ⟨W⟩)`.
pub fn mean_gradient<C: Cgf + ?Sized>(cgf: &C) -> Result<(f64, f64)> {
    let h = 2e-4 / cgf.min_quantum();
    let f = |g1: f64, g2: f64| cgf.eval(g1, g2).finite().ok_or(Error::UndefinedAtOrigin);
    let d = |e: (f64, f64)| -> Result<f64> {
        let at = |k: f64| f(k * h * e.0, k * h * e.1);
        Ok((8.0 * (at(1.0)? - at(-1.0)?) - (at(2.0)? - at(-2.0)?)) / (12.0 * h))
    };
    Ok((d((1.0, 0.0))?, d((0.0, 1.0))?))
}

/// `-⟨W⟩/⟨Q2⟩` estimated from the generating function; `None` without mean heat.
pub fn typical_efficiency<C: Cgf + ?Sized>(cgf: &C) -> Result<Option<f64>> {
    let (dq, dw) = mean_gradient(cgf)?;
    Ok((dq.abs() > 1e-14).then(|| -dw / dq))
}

/// Whether `φ` stays constant along `(γ1, γ2) → (γ1 + η_th δ, γ2 + δ)` to
/// relative `tolerance`, probed from the given base points. Pairs outside the
/// domain are skipped; with no usable pair the answer is `false`.
fn flat_along<C: Cgf + ?Sized>(cgf: &C, eta_th: f64, bases: &[(f64, f64)], tolerance: f64) -> bool {
    let scale = 1.0 / cgf.min_quantum();
    let mut compared = 0;
    for &(g1, g2) in bases {
        let Some(f0) = cgf.eval(g1, g2).finite() else {
            continue;
        };
        for k in [-1.0, -0.5, -0.1, 0.1, 0.5, 1.0] {
            let d = k * scale;
            if let Some(f1) = cgf.eval(g1 + eta_th * d, g2 + d).finite() {
                if (f1 - f0).abs() > tolerance * (1.0 + f0.abs()) {
                    return false;
                }
                compared += 1;
            }
        }
    }
    compared > 0
}

/// Checks whether the generating function depends on `(γ1, γ2)` only through
/// the combination `γ1 - η_th γ2`, by sampling pairs of points that differ
/// along `(η_th, 1)`.
pub fn degeneracy_check<C: Cgf + ?Sized>(cgf: &C, eta_th: f64, tolerance: f64) -> bool {
    let r = 1.0 / cgf.min_quantum();
    let ticks = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let bases: Vec<(f64, f64)> = ticks
        .iter()
        .flat_map(|&a| ticks.iter().map(move |&b| (a * r, b * r)))
        .collect();
    flat_along(cgf, eta_th, &bases, tolerance)
}

/// Probe positions: `0` and `±Γ ρ^k` for `k = 0..n`, ascending.
fn scan_positions(window: f64, n: usize, innermost: f64) -> Vec<f64> {
    let ratio = innermost.powf(1.0 / (n - 1) as f64);
    let side: Vec<f64> = (0..n).map(|k| window * ratio.powi(k as i32)).collect();
    let mut xs: Vec<f64> = side.iter().map(|x| -x).collect();
    xs.push(0.0);
    xs.extend(side.iter().rev());
    xs
}

/// `J(η) = -min_{γ2} φ(η γ2, γ2)`.
///
/// A logarithmic scan over `[-Γ, Γ]` brackets the minimum of the convex line
/// function, which golden-section search then refines. Points outside the
/// domain of `φ` count as `+∞`.
pub fn rate_function<C: Cgf + ?Sized>(cgf: &C, eta: f64, search: &SearchConfig) -> Result<RatePoint> {
    search.validate()?;
    if !eta.is_finite() {
        return Err(param("eta", "must be finite"));
    }
    let eta_th = typical_efficiency(cgf)?;
    rate_at(cgf, eta, search, eta_th)
}

fn rate_at<C: Cgf + ?Sized>(cgf: &C, eta: f64, search: &SearchConfig, eta_th: Option<f64>) -> Result<RatePoint> {
    let line = |g2: f64| cgf.eval(eta * g2, g2).or_infinity();
    if !line(0.0).is_finite() {
        return Err(Error::UndefinedAtOrigin);
    }
    let xs = scan_positions(search.window(cgf), search.scan_points, search.innermost);
    let fs: Vec<f64> = xs.iter().map(|&x| line(x)).collect();
    // Lowest probe; ties go to the probe nearest the origin.
    let mut best = xs.len() / 2;
    for (i, &f) in fs.iter().enumerate() {
        if f < fs[best] || (f == fs[best] && xs[i].abs() < xs[best].abs()) {
            best = i;
        }
    }
    let (mut gamma2, mut fmin) = (xs[best], fs[best]);
    let on_edge = best == 0 || best == xs.len() - 1;
    if !on_edge {
        let m = golden_section(line, xs[best - 1], xs[best + 1], search.tolerance);
        if m.fx < fmin {
            gamma2 = m.x;
            fmin = m.fx;
        }
    }

    if let Some(eta_th) = eta_th {
        // φ is analytic, so flatness near the origin is flatness everywhere;
        // probing far out would only amplify the error in η_th.
        let bases = [(0.0, 0.0)];
        // On a flat line (η = η_th) the minimum is the origin and J = 0.
        let flat_line = fmin >= -search.degeneracy_tolerance;
        if !flat_line && flat_along(cgf, eta_th, &bases, search.degeneracy_tolerance) {
            return Ok(RatePoint {
                eta,
                j: f64::INFINITY,
                argmin_gamma2: None,
                status: RateStatus::Degenerate,
            });
        }
    }
    if fmin < -search.j_max {
        return Ok(RatePoint {
            eta,
            j: f64::INFINITY,
            argmin_gamma2: Some(gamma2),
            status: RateStatus::DivergedToMinusInfinity,
        });
    }
    Ok(RatePoint {
        eta,
        // The origin bounds the minimum by zero.
        j: (-fmin).max(0.0),
        argmin_gamma2: Some(gamma2),
        status: if on_edge {
            RateStatus::BoundaryLimited
        } else {
            RateStatus::Converged
        },
    })
}

/// Rate function sampled on an efficiency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFunctionCurve {
    pub points: Vec<RatePoint>,
    /// `-⟨W⟩/⟨Q2⟩`, where the rate function vanishes.
    pub eta_th: Option<f64>,
    pub eta_ca: Option<f64>,
}

impl RateFunctionCurve {
    pub fn etas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.eta).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.j).collect()
    }

    /// Interior grid points where the rate is a strict local maximum.
    pub fn interior_maxima(&self) -> Vec<RatePoint> {
        self.points
            .windows(3)
            .filter(|w| w[1].j.is_finite() && w[1].j > w[0].j && w[1].j > w[2].j)
            .map(|w| w[1])
            .collect()
    }

    /// CSV with header `eta,j,status,argmin_gamma2`; a missing minimizer is `nan`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "eta,j,status,argmin_gamma2")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_num(p.eta),
                fmt_num(p.j),
                p.status.name(),
                fmt_num(p.argmin_gamma2.unwrap_or(f64::NAN))
            )?;
        }
        Ok(())
    }
}

/// `J(η)` on every grid point, evaluated in parallel.
pub fn rate_curve<C: Cgf + ?Sized>(cgf: &C, eta_grid: &[f64], search: &SearchConfig) -> Result<RateFunctionCurve> {
    search.validate()?;
    if let Some(bad) = eta_grid.iter().find(|e| !e.is_finite()) {
        return Err(param("eta_grid", format!("non-finite efficiency {bad}")));
    }
    let eta_th = typical_efficiency(cgf)?;
    let points = par::map_slice(eta_grid, |&eta| rate_at(cgf, eta, search, eta_th));
    Ok(RateFunctionCurve {
        points: points.into_iter().collect::<Result<_>>()?,
        eta_th,
        eta_ca: cgf.eta_carnot(),
    })
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreConfig {
    /// Multistart grid is `starts_per_axis × starts_per_axis`.
    pub starts_per_axis: usize,
    /// Half-width of the multistart grid; `None` picks `2 / min_quantum`.
    pub start_radius: Option<f64>,
    /// Ascent settings; `radius` is rescaled by `1 / min_quantum`.
    pub ascent: AscentConfig,
}

impl Default for LegendreConfig {
    fn default() -> Self {
        Self {
            starts_per_axis: 5,
            start_radius: None,
            ascent: AscentConfig {
                max_iterations: 300,
                gradient_tolerance: 1e-9,
                step: 1e-6,
                radius: 200.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegendreStatus {
    Converged,
    /// The objective grows without bound; the transform is `+∞`.
    Unbounded,
    /// No start reached the gradient tolerance; the best value is reported.
    NotConverged,
}

/// `I(q2, w) = sup_γ [γ1 q2 + γ2 w - φ(γ1, γ2)]` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LegendreCell {
    pub q2: f64,
    pub w: f64,
    pub value: f64,
    pub gamma: [f64; 2],
    pub status: LegendreStatus,
}

pub fn legendre_point<C: Cgf + ?Sized>(cgf: &C, q2: f64, w: f64, cfg: &LegendreConfig) -> LegendreCell {
    let scale = 1.0 / cgf.min_quantum();
    let radius = cfg.start_radius.unwrap_or(2.0 * scale);
    let ascent = AscentConfig {
        radius: cfg.ascent.radius * scale,
        ..cfg.ascent
    };
    let objective = |g: [f64; 2]| match cgf.eval(g[0], g[1]) {
        CgfValue::Finite(v) => g[0] * q2 + g[1] * w - v,
        CgfValue::Undefined(_) => f64::NEG_INFINITY,
    };
    let n = cfg.starts_per_axis.max(1);
    let ticks = if n == 1 { vec![0.0] } else { linspace(-radius, radius, n) };
    let mut best: Option<LegendreCell> = None;
    let mut escaped = false;
    for &a in &ticks {
        for &b in &ticks {
            if !objective([a, b]).is_finite() {
                continue;
            }
            let run = bfgs_maximize(objective, [a, b], &ascent);
            if run.escaped {
                escaped = true;
                continue;
            }
            let cell = LegendreCell {
                q2,
                w,
                value: run.fx,
                gamma: run.x,
                status: if run.converged {
                    LegendreStatus::Converged
                } else {
                    LegendreStatus::NotConverged
                },
            };
            best = Some(match best {
                None => cell,
                Some(prev) => better(prev, cell),
            });
        }
    }
    match best {
        Some(cell) if !escaped => cell,
        _ => LegendreCell {
            q2,
            w,
            value: f64::INFINITY,
            gamma: [f64::NAN, f64::NAN],
            status: LegendreStatus::Unbounded,
        },
    }
}

/// Largest objective; near-ties go to a converged run, then to the smaller `|γ|`.
fn better(a: LegendreCell, b: LegendreCell) -> LegendreCell {
    let tie = (a.value - b.value).abs() <= 1e-12 * (1.0 + a.value.abs().max(b.value.abs()));
    let norm = |c: &LegendreCell| c.gamma[0].hypot(c.gamma[1]);
    let rank = |c: &LegendreCell| (c.status != LegendreStatus::Converged) as u8;
    if tie {
        if (rank(&b), norm(&b)) < (rank(&a), norm(&a)) {
            b
        } else {
            a
        }
    } else if b.value > a.value {
        b
    } else {
        a
    }
}

/// Legendre transform on the product grid `q2_grid × w_grid`; `cells` is
/// row-major with one row per `q2` value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendreGrid {
    pub q2: Vec<f64>,
    pub w: Vec<f64>,
    pub cells: Vec<LegendreCell>,
}

impl LegendreGrid {
    pub fn get(&self, iq: usize, iw: usize) -> &LegendreCell {
        &self.cells[iq * self.w.len() + iw]
    }
}

pub fn legendre_2d<C: Cgf + ?Sized>(cgf: &C, q2_grid: &[f64], w_grid: &[f64], cfg: &LegendreConfig) -> LegendreGrid {
    let rows = par::map_slice(q2_grid, |&q| {
        w_grid.iter().map(|&w| legendre_point(cgf, q, w, cfg)).collect::<Vec<_>>()
    });
    LegendreGrid {
        q2: q2_grid.to_vec(),
        w: w_grid.to_vec(),
        cells: rows.into_iter().flatten().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionConfig {
    /// Heat window for the minimization over `q2`; `None` picks
    /// `|⟨Q2⟩| + 8 σ` on either side of zero.
    pub q2_range: Option<(f64, f64)>,
    pub scan_points: usize,
    pub tolerance: f64,
    pub legendre: LegendreConfig,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            q2_range: None,
            scan_points: 41,
            tolerance: 1e-8,
            legendre: LegendreConfig::default(),
        }
    }
}

/// `J(η) = min_{q2} I(q2, -η q2)`, the contraction of the joint rate function
/// onto the efficiency.
pub fn contraction_rate<C: Cgf + ?Sized>(cgf: &C, eta: f64, cfg: &ContractionConfig) -> Result<f64> {
    let (lo, hi) = match cfg.q2_range {
        Some(r) => r,
        None => {
            let h = 1e-3 / cgf.min_quantum();
            let f = |g: f64| cgf.eval(g, 0.0).finite().ok_or(Error::UndefinedAtOrigin);
            let (fp, f0, fm) = (f(h)?, f(0.0)?, f(-h)?);
            let mean = (fp - fm) / (2.0 * h);
            let var = ((fp - 2.0 * f0 + fm) / (h * h)).max(0.0);
            let span = mean.abs() + 8.0 * var.sqrt();
            (-span, span)
        }
    };
    if !(lo < hi) {
        return Err(param("q2_range", "lower end must be below upper end"));
    }
    let rate = |q: f64| legendre_point(cgf, q, -eta * q, &cfg.legendre).value;
    let mut qs = linspace(lo, hi, cfg.scan_points.max(3));
    if lo < 0.0 && hi > 0.0 {
        qs.push(0.0);
        qs.sort_by(f64::total_cmp);
        qs.dedup();
    }
    let vals: Vec<f64> = qs.iter().map(|&q| rate(q)).collect();
    let mut best = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v < vals[best] {
            best = i;
        }
    }
    let a = qs[best.saturating_sub(1)];
    let b = qs[(best + 1).min(qs.len() - 1)];
    let m = golden_section(rate, a, b, cfg.tolerance);
    Ok(m.fx.min(vals[best]))
}

/// Rectangular window in `(γ1, γ2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridBounds {
    pub gamma1: (f64, f64),
    pub gamma2: (f64, f64),
}

/// `φ` sampled on a regular grid. `values[i2 * gamma1.len() + i1]` holds
/// `φ(gamma1[i1], gamma2[i2])`: one row per `γ2` value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourGrid {
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub values: Vec<CgfValue>,
}

impl ContourGrid {
    pub fn get(&self, i1: usize, i2: usize) -> CgfValue {
        self.values[i2 * self.gamma1.len() + i1]
    }

    pub fn undefined_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }

    /// `{gamma1, gamma2, phi, undefined}` with `null` for undefined cells in
    /// `phi` and the reason (or `null`) in `undefined`.
    pub fn to_json(&self) -> serde_json::Value {
        let n1 = self.gamma1.len();
        let rows = |f: &dyn Fn(CgfValue) -> serde_json::Value| -> Vec<Vec<serde_json::Value>> {
            self.values.chunks(n1).map(|row| row.iter().map(|&v| f(v)).collect()).collect()
        };
        let phi = rows(&|v| match v {
            CgfValue::Finite(x) => serde_json::json!(x),
            CgfValue::Undefined(_) => serde_json::Value::Null,
        });
        let undefined = rows(&|v| match v {
            CgfValue::Finite(_) => serde_json::Value::Null,
            CgfValue::Undefined(r) => serde_json::to_value(r).unwrap_or_default(),
        });
        serde_json::json!({
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "phi": phi,
            "undefined": undefined,
        })
    }

    /// CSV with header `gamma1,gamma2,phi,status`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "gamma1,gamma2,phi,status")?;
        for (i2, &g2) in self.gamma2.iter().enumerate() {
            for (i1, &g1) in self.gamma1.iter().enumerate() {
                let (phi, status) = match self.get(i1, i2) {
                    CgfValue::Finite(x) => (fmt_num(x), "finite".to_string()),
                    CgfValue::Undefined(r) => ("nan".to_string(), reason_name(r)),
                };
                writeln!(out, "{},{},{phi},{status}", fmt_num(g1), fmt_num(g2))?;
            }
        }
        Ok(())
    }
}

fn reason_name(r: UndefinedReason) -> String {
    serde_json::to_value(r)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Evaluates `φ` on an `n1 × n2` grid spanning `bounds`, rows in parallel.
pub fn contour_grid<C: Cgf + ?Sized>(cgf: &C, bounds: &GridBounds, n1: usize, n2: usize) -> Result<ContourGrid> {
    let (a1, b1) = bounds.gamma1;
    let (a2, b2) = bounds.gamma2;
    if !(a1 < b1 && a2 < b2) || ![a1, b1, a2, b2].iter().all(|v| v.is_finite()) {
        return Err(param("bounds", "window must have finite, increasing edges"));
    }
    if n1 < 2 || n2 < 2 {
        return Err(param("resolution", "need at least two points per axis"));
    }
    let gamma1 = linspace(a1, b1, n1);
    let gamma2 = linspace(a2, b2, n2);
    let rows = par::map_slice(&gamma2, |&g2| gamma1.iter().map(|&g1| cgf.eval(g1, g2)).collect::<Vec<_>>());
    Ok(ContourGrid {
        gamma1,
        gamma2,
        values: rows.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gaussian `φ = m·γ + γᵀΣγ/2` with closed-form transforms.
    struct Gaussian {
        m: [f64; 2],
        s: [[f64; 2]; 2],
    }

    impl Cgf for Gaussian {
        fn eval(&self, g1: f64, g2: f64) -> CgfValue {
            let g = [g1, g2];
            let quad = g[0] * (self.s[0][0] * g[0] + self.s[0][1] * g[1]) + g[1] * (self.s[1][0] * g[0] + self.s[1][1] * g[1]);
            CgfValue::Finite(self.m[0] * g1 + self.m[1] * g2 + 0.5 * quad)
        }

        fn min_quantum(&self) -> f64 {
            1.0
        }
    }

    fn gaussian() -> Gaussian {
        Gaussian {
            m: [1.0, -0.4],
            s: [[0.5, -0.2], [-0.2, 0.3]],
        }
    }

    /// For Gaussian fluctuations `J(η) = (ηm1 + m2)² / (2 aᵀΣa)`, `a = (η, 1)`.
    fn gaussian_rate(g: &Gaussian, eta: f64) -> f64 {
        let num = (eta * g.m[0] + g.m[1]).powi(2);
        let var = eta * eta * g.s[0][0] + 2.0 * eta * g.s[0][1] + g.s[1][1];
        num / (2.0 * var)
    }

    #[test]
    fn rate_matches_gaussian_closed_form() {
        let g = gaussian();
        for eta in [-1.0, 0.0, 0.4, 0.9, 1.5] {
            let p = rate_function(&g, eta, &SearchConfig::default()).unwrap();
            assert_eq!(p.status, RateStatus::Converged);
            assert!((p.j - gaussian_rate(&g, eta)).abs() < 1e-10, "eta {eta}: {}", p.j);
        }
    }

    #[test]
    fn rate_vanishes_at_typical_efficiency() {
        let g = gaussian();
        let p = rate_function(&g, 0.4, &SearchConfig::default()).unwrap();
        assert!(p.j.abs() < 1e-14);
    }

    #[test]
    fn legendre_matches_gaussian_closed_form() {
        let g = gaussian();
        // I(x) = (x - m)ᵀ Σ⁻¹ (x - m) / 2
        let det = g.s[0][0] * g.s[1][1] - g.s[0][1] * g.s[1][0];
        let inv = [[g.s[1][1] / det, -g.s[0][1] / det], [-g.s[1][0] / det, g.s[0][0] / det]];
        for (q, w) in [(1.0, -0.4), (0.2, 0.3), (2.0, -1.5)] {
            let d = [q - g.m[0], w - g.m[1]];
            let expected = 0.5 * (d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]));
            let cell = legendre_point(&g, q, w, &LegendreConfig::default());
            assert_eq!(cell.status, LegendreStatus::Converged, "{cell:?}");
            assert!((cell.value - expected).abs() < 1e-9, "({q},{w}): {} vs {expected}", cell.value);
        }
    }

    #[test]
    fn contraction_agrees_with_line_minimum() {
        let g = gaussian();
        for eta in [0.0, 0.8] {
            let j = contraction_rate(&g, eta, &ContractionConfig::default()).unwrap();
            assert!((j - gaussian_rate(&g, eta)).abs() < 1e-7, "eta {eta}: {j}");
        }
    }

    #[test]
    fn linear_cgf_is_unbounded_in_legendre() {
        struct Line;
        impl Cgf for Line {
            fn eval(&self, g1: f64, g2: f64) -> CgfValue {
                CgfValue::Finite(g1 - 0.5 * g2)
            }
            fn min_quantum(&self) -> f64 {
                1.0
            }
        }
        let cell = legendre_point(&Line, 2.0, 0.0, &LegendreConfig::default());
        assert_eq!(cell.status, LegendreStatus::Unbounded);
        assert!(cell.value.is_infinite());
    }

    #[test]
    fn degenerate_function_detected() {
        struct Flat;
        impl Cgf for Flat {
            fn eval(&self, g1: f64, g2: f64) -> CgfValue {
                let c = g1 - 0.5 * g2;
                CgfValue::Finite(c + 0.3 * c * c)
            }
            fn min_quantum(&self) -> f64 {
                1.0
            }
        }
        assert!(degeneracy_check(&Flat, 0.5, 1e-10));
        assert!(!degeneracy_check(&Flat, 0.6, 1e-10));
        assert!(!degeneracy_check(&gaussian(), 0.4, 1e-10));
        let p = rate_function(&Flat, 0.7, &SearchConfig::default()).unwrap();
        assert_eq!(p.status, RateStatus::Degenerate);
        assert!(p.is_infinite());
        let p = rate_function(&Flat, 0.5, &SearchConfig::default()).unwrap();
        assert!(p.j.abs() < 1e-12);
    }

    #[test]
    fn contour_layout_is_row_per_gamma2() {
        let g = gaussian();
        let b = GridBounds {
            gamma1: (-1.0, 1.0),
            gamma2: (0.0, 2.0),
        };
        let grid = contour_grid(&g, &b, 3, 2).unwrap();
        assert_eq!(grid.values.len(), 6);
        assert_eq!(grid.get(2, 1), g.eval(1.0, 2.0));
        assert_eq!(grid.values[3], g.eval(-1.0, 2.0));
        let json = grid.to_json();
        assert_eq!(json["phi"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn contour_rejects_empty_window() {
        let b = GridBounds {
            gamma1: (1.0, 1.0),
            gamma2: (0.0, 2.0),
        };
        assert!(contour_grid(&gaussian(), &b, 3, 3).is_err());
    }
}
