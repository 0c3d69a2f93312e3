use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use otto_ldf::cgf::DistributionCgf;
use otto_ldf::export::fmt_num;
use otto_ldf::joint::{build_joint_harmonic, build_joint_harmonic_auto, build_joint_two_level, chain_moments, MeasurementChain};
use otto_ldf::ldf::{
    contour_grid, contraction_rate, degeneracy_check, linspace, rate_curve, rate_function, typical_efficiency, ContractionConfig,
    GridBounds,
};
use otto_ldf::montecarlo::{empirical_rate, sample_blocks, BlockConfig, CycleSampler, Histogram};
use otto_ldf::{BathPair, Cgf, EngineModel, Expansion, HarmonicCgf, HarmonicEngine, JointDistribution, Pearson, SearchConfig};
use otto_ldf::{TwoLevelCgf, TwoLevelEngine};

use crate::config::{ConfigError, Regime, RunConfig};
use crate::output::{Sink, PLOT_CONTOUR, PLOT_LDF, PLOT_PEARSON, PLOT_SAMPLE};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Output(PathBuf, io::Error),
    Numerical(otto_ldf::Error),
    Verification(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output(..) => 2,
            CliError::Numerical(otto_ldf::Error::Parameter { .. }) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Output(p, e) => write!(f, "cannot write {}: {e}", p.display()),
            CliError::Numerical(e) => write!(f, "numerical error: {e}"),
            CliError::Verification(failures) => write!(f, "verification failed: {}", failures.join("; ")),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<otto_ldf::Error> for CliError {
    fn from(e: otto_ldf::Error) -> Self {
        CliError::Numerical(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_at(dir: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Output(dir.to_path_buf(), e)
}

fn baths(c: &RunConfig) -> Result<BathPair> {
    Ok(BathPair::new(c.baths.beta_c, c.baths.beta_h)?)
}

fn two_level(c: &RunConfig, q_star: f64) -> Result<TwoLevelEngine> {
    Ok(TwoLevelEngine::with_q_star(c.two_level.nu0, c.two_level.nu_tau, q_star)?)
}

fn harmonic(c: &RunConfig, q_star: f64) -> Result<HarmonicEngine> {
    Ok(HarmonicEngine::new(c.harmonic.omega0, c.harmonic.omega_tau, q_star)?)
}

fn harmonic_distribution(c: &RunConfig, engine: &HarmonicEngine) -> Result<JointDistribution> {
    let b = baths(c)?;
    Ok(if c.harmonic.levels == 0 {
        build_joint_harmonic_auto(engine, &b, c.harmonic.tail)?
    } else {
        build_joint_harmonic(engine, &b, c.harmonic.levels)?
    })
}

/// One engine's generating function for a rate-function or contour run.
struct Variant {
    engine: &'static str,
    label: &'static str,
    cgf: Box<dyn Cgf + Send>,
}

fn variants(c: &RunConfig) -> Result<Vec<Variant>> {
    let b = baths(c)?;
    let mut forms = vec![("exact", Expansion::Exact)];
    if c.run.regime == Regime::Linear {
        forms.push(("linear", Expansion::Linear));
    }
    let label = |name: &'static str| if c.run.regime == Regime::Adiabatic { "adiabatic" } else { name };
    let mut out = Vec::new();
    if c.two_level.enabled {
        let e = two_level(c, c.two_level_q_star())?;
        for &(name, x) in &forms {
            out.push(Variant {
                engine: "two_level",
                label: label(name),
                cgf: Box::new(TwoLevelCgf::new(e, b, x)),
            });
        }
    }
    if c.harmonic.enabled {
        let e = harmonic(c, c.harmonic_q_star())?;
        for &(name, x) in &forms {
            out.push(Variant {
                engine: "harmonic",
                label: label(name),
                cgf: Box::new(HarmonicCgf::new(e, b, x)),
            });
        }
    }
    Ok(out)
}

fn search(c: &RunConfig) -> SearchConfig {
    SearchConfig {
        j_max: c.ldf.j_max,
        tolerance: c.run.tolerance,
        ..SearchConfig::default()
    }
}

pub fn pearson(c: &RunConfig, dir: &Path, verify: bool) -> Result<Vec<PathBuf>> {
    let mut sink = Sink::new(dir, "pearson", c).map_err(io_at(dir))?;
    let b = baths(c)?;
    let write_rows = |rows: &[(f64, Pearson)], w: &mut dyn io::Write| -> io::Result<()> {
        writeln!(w, "q_star,rho,status")?;
        for (q, p) in rows {
            match p {
                Pearson::Value(r) => writeln!(w, "{},{},ok", fmt_num(*q), fmt_num(*r))?,
                Pearson::Degenerate => writeln!(w, "{},nan,degenerate", fmt_num(*q))?,
            }
        }
        Ok(())
    };
    let grid = |lo: f64, hi: f64, n: usize| if n == 1 { vec![lo] } else { linspace(lo, hi, n) };
    let levels = (c.harmonic.levels > 0).then_some(c.harmonic.levels);
    let rho = |engine: EngineModel| -> Result<Pearson> {
        let chain = MeasurementChain::new(&engine, &b, levels, c.harmonic.tail)?;
        Ok(chain_moments(&chain)?.pearson)
    };
    let mut sweeps: Vec<(&str, Vec<(f64, Pearson)>)> = Vec::new();
    if c.two_level.enabled {
        let t = &c.two_level;
        let rows = grid(t.sweep_min, t.sweep_max, t.sweep_points)
            .into_iter()
            .map(|q| Ok((q, rho(two_level(c, q)?.into())?)))
            .collect::<Result<Vec<_>>>()?;
        sweeps.push(("two_level", rows));
    }
    if c.harmonic.enabled {
        let h = &c.harmonic;
        let rows = grid(h.sweep_min, h.sweep_max, h.sweep_points)
            .into_iter()
            .map(|q| Ok((q, rho(harmonic(c, q)?.into())?)))
            .collect::<Result<Vec<_>>>()?;
        sweeps.push(("harmonic", rows));
    }
    for (name, rows) in &sweeps {
        let extra = [("engine", name.to_string())];
        sink.csv(&format!("pearson_{name}.csv"), &extra, |w| write_rows(rows, w))
            .map_err(io_at(dir))?;
        let finite: Vec<f64> = rows.iter().filter_map(|(_, p)| p.value()).collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "pearson {name}: {} points, rho in [{lo:.6}, {hi:.6}], {} degenerate",
            rows.len(),
            rows.len() - finite.len()
        );
    }
    sink.script("plot_pearson.py", PLOT_PEARSON).map_err(io_at(dir))?;
    if verify {
        verify_oracles(c)?;
    }
    Ok(sink.written)
}

pub fn ldf(c: &RunConfig, dir: &Path, verify: bool) -> Result<Vec<PathBuf>> {
    let mut sink = Sink::new(dir, "ldf", c).map_err(io_at(dir))?;
    let l = &c.ldf;
    let grid = if l.eta_points == 1 {
        vec![l.eta_min]
    } else {
        linspace(l.eta_min, l.eta_max, l.eta_points)
    };
    let s = search(c);
    for v in variants(c)? {
        let curve = rate_curve(&*v.cgf, &grid, &s)?;
        let eta_th = curve.eta_th;
        let extra = [
            ("engine", v.engine.to_string()),
            ("variant", v.label.to_string()),
            ("eta_th", eta_th.map_or("none".into(), fmt_num)),
            ("eta_ca", fmt_num(baths(c)?.eta_carnot())),
        ];
        let name = format!("ldf_{}_{}.csv", v.engine, v.label);
        sink.csv(&name, &extra, |w| curve.write_csv(w)).map_err(io_at(dir))?;
        let infinite = curve.points.iter().filter(|p| p.is_infinite()).count();
        let maxima: Vec<String> = curve.interior_maxima().iter().map(|p| format!("{:.4}", p.eta)).collect();
        println!(
            "ldf {} {}: eta_th {}, {} of {} points infinite, interior maxima at [{}]",
            v.engine,
            v.label,
            eta_th.map_or("none".into(), |e| format!("{e:.6}")),
            infinite,
            grid.len(),
            maxima.join(", ")
        );
    }
    sink.script("plot_ldf.py", PLOT_LDF).map_err(io_at(dir))?;
    if verify {
        verify_oracles(c)?;
        verify_contraction(c)?;
    }
    Ok(sink.written)
}

pub fn contour(c: &RunConfig, dir: &Path, verify: bool) -> Result<Vec<PathBuf>> {
    let mut sink = Sink::new(dir, "contour", c).map_err(io_at(dir))?;
    let k = &c.contour;
    let bounds = GridBounds {
        gamma1: (k.gamma1_min, k.gamma1_max),
        gamma2: (k.gamma2_min, k.gamma2_max),
    };
    for v in variants(c)? {
        let grid = contour_grid(&*v.cgf, &bounds, k.points1, k.points2)?;
        let eta_th = typical_efficiency(&*v.cgf)?;
        let degenerate = eta_th.is_some_and(|e| degeneracy_check(&*v.cgf, e, 1e-10));
        let mut doc = grid.to_json();
        if let Some(obj) = doc.as_object_mut() {
            let mask: Vec<Vec<bool>> = grid
                .values
                .chunks(grid.gamma1.len())
                .map(|row| row.iter().map(|v| !v.is_finite()).collect())
                .collect();
            obj.insert("mask".into(), serde_json::json!(mask));
            obj.insert("engine".into(), v.engine.into());
            obj.insert("variant".into(), v.label.into());
            obj.insert("eta_th".into(), serde_json::json!(eta_th));
            obj.insert("degenerate".into(), degenerate.into());
        }
        let stem = format!("contour_{}_{}", v.engine, v.label);
        sink.json(&format!("{stem}.json"), doc).map_err(io_at(dir))?;
        let extra = [
            ("engine", v.engine.to_string()),
            ("variant", v.label.to_string()),
            ("degenerate", degenerate.to_string()),
        ];
        sink.csv(&format!("{stem}.csv"), &extra, |w| grid.write_csv(w))
            .map_err(io_at(dir))?;
        println!(
            "contour {} {}: {} of {} cells undefined, degenerate {}",
            v.engine,
            v.label,
            grid.undefined_count(),
            grid.values.len(),
            degenerate
        );
    }
    sink.script("plot_contour.py", PLOT_CONTOUR).map_err(io_at(dir))?;
    if verify {
        verify_oracles(c)?;
    }
    Ok(sink.written)
}

pub fn sample(c: &RunConfig, dir: &Path, verify: bool) -> Result<Vec<PathBuf>> {
    if c.run.regime == Regime::Linear {
        return Err(ConfigError::field("run.regime", "sampling draws from the exact measurement chain; use exact or adiabatic").into());
    }
    let mut sink = Sink::new(dir, "sample", c).map_err(io_at(dir))?;
    let b = baths(c)?;
    let mut engines: Vec<(&str, EngineModel)> = Vec::new();
    if c.two_level.enabled {
        engines.push(("two_level", two_level(c, c.two_level_q_star())?.into()));
    }
    if c.harmonic.enabled {
        engines.push(("harmonic", harmonic(c, c.harmonic_q_star())?.into()));
    }
    for (name, engine) in &engines {
        let sampler = CycleSampler::new(engine, &b, c.harmonic.tail)?;
        for &s in &c.sample.s {
            let cfg = BlockConfig {
                s,
                blocks: c.sample.blocks,
                seed: c.run.seed,
            };
            let est = sample_blocks(&sampler, &cfg, Histogram::default_efficiency())?;
            let extra = [("engine", name.to_string())];
            sink.csv(&format!("sample_{name}_s{s}_hist.csv"), &extra, |w| est.write_histogram_csv(w))
                .map_err(io_at(dir))?;
            let rates = empirical_rate(&est)?;
            sink.csv(&format!("sample_{name}_s{s}_rate.csv"), &extra, |w| est.write_rate_csv(w))
                .map_err(io_at(dir))?;
            let top = est
                .histogram
                .counts
                .iter()
                .enumerate()
                .max_by_key(|&(_, n)| *n)
                .map(|(i, _)| est.histogram.centers[i]);
            println!(
                "sample {name} s={s}: {} blocks, {} without heat input, {} bins filled, mode at eta {}",
                est.blocks,
                est.excluded,
                rates.len(),
                top.map_or("none".into(), |e| format!("{e:.2}"))
            );
        }
    }
    sink.script("plot_sample.py", PLOT_SAMPLE).map_err(io_at(dir))?;
    if verify {
        verify_oracles(c)?;
    }
    Ok(sink.written)
}

/// Closed-form generating functions against brute-force sums over the
/// built distributions at a few points well inside the domain.
fn verify_oracles(c: &RunConfig) -> Result<()> {
    let b = baths(c)?;
    let mut failures = Vec::new();
    let mut check = |name: &str, cgf: &dyn Cgf, dist: &JointDistribution, points: &[(f64, f64)], tol: f64| -> Result<()> {
        let oracle = DistributionCgf::new(dist)?;
        let mut worst = 0.0f64;
        for &(g1, g2) in points {
            if let (Some(a), Some(o)) = (cgf.eval(g1, g2).finite(), oracle.eval(g1, g2).finite()) {
                worst = worst.max((a - o).abs());
            }
        }
        eprintln!("verify {name}: max |cgf - oracle| = {worst:.2e} (tol {tol:.0e})");
        if !(worst <= tol) {
            failures.push(format!("{name} cgf differs from oracle by {worst:.2e}"));
        }
        Ok(())
    };
    if c.two_level.enabled {
        let e = two_level(c, c.two_level_q_star())?;
        let pts = [(0.1, -0.2), (-0.5, 0.3), (0.7, 0.4), (0.0, 0.0)];
        check("two_level", &TwoLevelCgf::new(e, b, Expansion::Exact), &build_joint_two_level(&e, &b), &pts, 1e-12)?;
    }
    if c.harmonic.enabled {
        let e = harmonic(c, c.harmonic_q_star())?;
        let q = e.omega0();
        let pts = [(0.02 / q, 0.01 / q), (-0.1 / q, 0.05 / q), (0.0, -0.1 / q)];
        // the oracle gets its own tail so that truncation stays below the tolerance
        let dist = if c.harmonic.levels == 0 {
            build_joint_harmonic_auto(&e, &b, c.harmonic.tail.min(1e-13))?
        } else {
            harmonic_distribution(c, &e)?
        };
        check("harmonic", &HarmonicCgf::new(e, b, Expansion::Exact), &dist, &pts, 1e-8)?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures))
    }
}

/// Line minimization against the Legendre-contraction route at three
/// efficiencies. Adiabatic engines are skipped: there both routes are `+∞`.
fn verify_contraction(c: &RunConfig) -> Result<()> {
    if c.run.regime == Regime::Adiabatic {
        return Ok(());
    }
    let s = search(c);
    let mut failures = Vec::new();
    for v in variants(c)?.into_iter().filter(|v| v.label == "exact") {
        let eta_ca = v.cgf.eta_carnot().unwrap_or(0.5);
        let mut worst = 0.0f64;
        for eta in [0.0, 0.5 * eta_ca, eta_ca] {
            let a = rate_function(&*v.cgf, eta, &s)?.j;
            let b = contraction_rate(&*v.cgf, eta, &ContractionConfig::default())?;
            worst = worst.max((a - b).abs());
        }
        eprintln!("verify {} contraction: max difference {worst:.2e} (tol 1e-4)", v.engine);
        if !(worst <= 1e-4) {
            failures.push(format!("{} rate function differs from contraction by {worst:.2e}", v.engine));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures))
    }
}
