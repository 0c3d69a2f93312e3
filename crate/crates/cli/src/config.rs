//! Run configuration: a TOML file of flat `key = value` pairs in one section
//! per engine, layered as defaults < preset < file < `--set` < flags.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Configuration problem with the offending field and, when it came from a
/// file, the line it sits on.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.into()),
            line: None,
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Self {
            field: None,
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Exact,
    Linear,
    Adiabatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Baths {
    pub beta_c: f64,
    pub beta_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoLevel {
    pub enabled: bool,
    pub nu0: f64,
    pub nu_tau: f64,
    /// `2u - 1`
    pub q_star: f64,
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Harmonic {
    pub enabled: bool,
    pub omega0: f64,
    pub omega_tau: f64,
    pub q_star: f64,
    /// Levels per spectrum for distributions; 0 picks the smallest
    /// truncation meeting `tail`.
    pub levels: usize,
    pub tail: f64,
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Run {
    pub regime: Regime,
    /// Bracket tolerance of the rate-function line search.
    pub tolerance: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ldf {
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_points: usize,
    pub j_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Contour {
    pub gamma1_min: f64,
    pub gamma1_max: f64,
    pub gamma2_min: f64,
    pub gamma2_max: f64,
    pub points1: usize,
    pub points2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sample {
    /// Cycles per block; one histogram per entry.
    pub s: Vec<usize>,
    pub blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub baths: Baths,
    pub two_level: TwoLevel,
    pub harmonic: Harmonic,
    pub run: Run,
    pub ldf: Ldf,
    pub contour: Contour,
    pub sample: Sample,
}

impl Default for Baths {
    fn default() -> Self {
        Self {
            beta_c: 3.0,
            beta_h: 0.1,
        }
    }
}

impl Default for TwoLevel {
    fn default() -> Self {
        Self {
            enabled: true,
            nu0: 1.0,
            nu_tau: 2.0,
            q_star: 0.9,
            sweep_min: 0.0,
            sweep_max: 1.0,
            sweep_points: 51,
        }
    }
}

impl Default for Harmonic {
    fn default() -> Self {
        Self {
            enabled: true,
            omega0: 1.0,
            omega_tau: 2.0,
            q_star: 1.2,
            levels: 0,
            tail: 1e-10,
            sweep_min: 1.0,
            sweep_max: 2.0,
            sweep_points: 21,
        }
    }
}

impl Default for Run {
    fn default() -> Self {
        Self {
            regime: Regime::Exact,
            tolerance: 1e-10,
            seed: 1,
            out: None,
        }
    }
}

impl Default for Ldf {
    fn default() -> Self {
        Self {
            eta_min: -0.5,
            eta_max: 1.5,
            eta_points: 201,
            j_max: 1e3,
        }
    }
}

impl Default for Contour {
    fn default() -> Self {
        Self {
            gamma1_min: -3.0,
            gamma1_max: 3.0,
            gamma2_min: -3.0,
            gamma2_max: 3.0,
            points1: 101,
            points2: 101,
        }
    }
}

impl Default for Sample {
    fn default() -> Self {
        Self {
            s: vec![1, 20, 50],
            blocks: 100_000,
        }
    }
}

/// Parameter sets of the published figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Pearson coefficient against Q* for both engines.
    Fig1,
    /// Nonadiabatic rate functions.
    Fig2a,
    /// Adiabatic rate functions.
    Fig2b,
    /// Two-level contour, nonadiabatic.
    Fig3a,
    /// Two-level contour, adiabatic.
    Fig3b,
    /// Two-level rate function from the linear expansion.
    FigS1a,
    /// Harmonic rate function from the linear expansion.
    FigS1b,
    /// Harmonic contour, nonadiabatic.
    FigS2a,
    /// Harmonic contour, adiabatic.
    FigS2b,
}

impl Preset {
    fn overrides(self) -> &'static str {
        match self {
            Preset::Fig1 | Preset::Fig2a => "",
            Preset::Fig2b => "[run]\nregime = \"adiabatic\"\n",
            Preset::Fig3a => "[harmonic]\nenabled = false\n",
            Preset::Fig3b => "[harmonic]\nenabled = false\n[run]\nregime = \"adiabatic\"\n",
            Preset::FigS1a => "[harmonic]\nenabled = false\n[two_level]\nq_star = 0.998\n[run]\nregime = \"linear\"\n",
            Preset::FigS1b => "[two_level]\nenabled = false\n[harmonic]\nq_star = 1.0005\n[run]\nregime = \"linear\"\n",
            Preset::FigS2a => "[two_level]\nenabled = false\n",
            Preset::FigS2b => "[two_level]\nenabled = false\n[run]\nregime = \"adiabatic\"\n",
        }
    }
}

/// Line (1-based) of `key` inside `[section]`, found by a plain scan.
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn parse_table(source: &str, origin: &str) -> Result<Table, ConfigError> {
    source.parse::<Table>().map_err(|e| {
        let line = e.span().map(|s| source[..s.start].lines().count().max(1));
        ConfigError {
            field: None,
            line,
            message: format!("{origin}: {}", e.message()),
        }
    })
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `section.key=value`, with `value` in TOML syntax; bare words are taken
/// as strings.
fn parse_assignment(spec: &str) -> Result<(String, String, Value), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::general(format!("--set `{spec}`: expected section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| ConfigError::field(path.trim(), "--set needs a `section.key` path"))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((section.to_string(), key.to_string(), value))
}

/// Sources for one resolved configuration.
#[derive(Debug, Default, Clone)]
pub struct Layers {
    pub preset: Option<Preset>,
    pub file: Option<(PathBuf, String)>,
    pub sets: Vec<String>,
}

impl RunConfig {
    pub fn resolve(layers: &Layers) -> Result<Self, ConfigError> {
        let mut table = Table::try_from(RunConfig::default()).map_err(|e| ConfigError::general(e.to_string()))?;
        if let Some(p) = layers.preset {
            merge(&mut table, parse_table(p.overrides(), "preset")?);
        }
        let source = layers.file.as_ref().map(|(_, s)| s.as_str()).unwrap_or("");
        if let Some((path, text)) = &layers.file {
            merge(&mut table, parse_table(text, &path.display().to_string())?);
        }
        for spec in &layers.sets {
            let (section, key, value) = parse_assignment(spec)?;
            let mut inner = Table::new();
            inner.insert(key, value);
            let mut outer = Table::new();
            outer.insert(section, Value::Table(inner));
            merge(&mut table, outer);
        }
        let config: RunConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| {
            let message = e.message().to_string();
            let field = unknown_or_typed_field(&message, source);
            ConfigError {
                line: field.as_ref().and_then(|(s, k)| locate(source, s, k)),
                field: field.map(|(s, k)| format!("{s}.{k}")),
                message,
            }
        })?;
        config.validate().map_err(|mut e| {
            if let Some((s, k)) = e.field.as_deref().and_then(|f| f.split_once('.')) {
                e.line = locate(source, s, k);
            }
            e
        })?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, field: &str, msg: &str| if ok { Ok(()) } else { Err(ConfigError::field(field, msg)) };
        let b = &self.baths;
        check(b.beta_h.is_finite() && b.beta_h > 0.0, "baths.beta_h", "must be positive and finite")?;
        check(b.beta_c.is_finite() && b.beta_c > b.beta_h, "baths.beta_c", "must be finite and above beta_h")?;
        check(self.two_level.enabled || self.harmonic.enabled, "two_level.enabled", "enable at least one engine")?;
        let t = &self.two_level;
        check(t.nu0 > 0.0 && t.nu_tau > t.nu0, "two_level.nu_tau", "need 0 < nu0 < nu_tau")?;
        check((-1.0..=1.0).contains(&t.q_star), "two_level.q_star", "must lie in [-1, 1]")?;
        check(t.sweep_points >= 1, "two_level.sweep_points", "need at least one point")?;
        check(
            -1.0 <= t.sweep_min && t.sweep_min <= t.sweep_max && t.sweep_max <= 1.0,
            "two_level.sweep_max",
            "need -1 <= sweep_min <= sweep_max <= 1",
        )?;
        let h = &self.harmonic;
        check(h.omega0 > 0.0 && h.omega_tau > h.omega0, "harmonic.omega_tau", "need 0 < omega0 < omega_tau")?;
        check(h.q_star.is_finite() && h.q_star >= 1.0, "harmonic.q_star", "must be >= 1")?;
        check(h.tail > 0.0 && h.tail < 1e-2, "harmonic.tail", "must lie in (0, 1e-2)")?;
        check(h.levels == 0 || h.levels >= 2, "harmonic.levels", "use 0 for automatic or at least 2")?;
        check(h.sweep_points >= 1, "harmonic.sweep_points", "need at least one point")?;
        check(
            1.0 <= h.sweep_min && h.sweep_min <= h.sweep_max && h.sweep_max.is_finite(),
            "harmonic.sweep_max",
            "need 1 <= sweep_min <= sweep_max",
        )?;
        check(self.run.tolerance > 0.0 && self.run.tolerance < 1e-2, "run.tolerance", "must lie in (0, 1e-2)")?;
        let l = &self.ldf;
        check(l.eta_points >= 1, "ldf.eta_points", "need at least one point")?;
        check(
            l.eta_min.is_finite() && l.eta_max.is_finite() && (l.eta_min < l.eta_max || (l.eta_points == 1 && l.eta_min == l.eta_max)),
            "ldf.eta_max",
            "eta grid must be increasing",
        )?;
        check(l.j_max > 0.0, "ldf.j_max", "must be positive")?;
        let c = &self.contour;
        check(c.gamma1_min < c.gamma1_max, "contour.gamma1_max", "window must have positive width")?;
        check(c.gamma2_min < c.gamma2_max, "contour.gamma2_max", "window must have positive height")?;
        check(c.points1 >= 2 && c.points2 >= 2, "contour.points1", "need at least two points per axis")?;
        let s = &self.sample;
        check(!s.s.is_empty() && s.s.iter().all(|&v| v >= 1), "sample.s", "need block lengths >= 1")?;
        check(s.blocks >= 1, "sample.blocks", "need at least one block")?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Q* actually used for the two-level engine under the current regime.
    pub fn two_level_q_star(&self) -> f64 {
        if self.run.regime == Regime::Adiabatic {
            1.0
        } else {
            self.two_level.q_star
        }
    }

    pub fn harmonic_q_star(&self) -> f64 {
        if self.run.regime == Regime::Adiabatic {
            1.0
        } else {
            self.harmonic.q_star
        }
    }
}

/// Best guess at the `(section, key)` a deserialization message refers to.
fn unknown_or_typed_field(message: &str, source: &str) -> Option<(String, String)> {
    let quoted: Vec<&str> = message.split('`').skip(1).step_by(2).collect();
    for section in ["baths", "two_level", "harmonic", "run", "ldf", "contour", "sample"] {
        for key in &quoted {
            if locate(source, section, key).is_some() {
                return Some((section.to_string(), key.to_string()));
            }
        }
    }
    None
}
