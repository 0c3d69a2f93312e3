//! Monte Carlo sampling of engine cycles and empirical efficiency statistics.
//!
//! Each block of `s` cycles draws from its own ChaCha stream (`seed`, stream
//! = block index), so estimates are identical whether blocks run in parallel
//! or not.

use std::io::{self, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engines::{BathPair, EngineModel};
use crate::error::{param, Error, Result};
use crate::export::fmt_num;
use crate::joint::{MeasurementChain, TransitionMatrix, DEFAULT_TAIL_TOLERANCE};
use crate::par;

/// Energy changes of one cycle: `W1 = E_m^τ - E_n^0`, `Q2 = E_k^τ - E_m^τ`,
/// `W3 = E_l^0 - E_k^τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleSample {
    pub w1: f64,
    pub q2: f64,
    pub w3: f64,
    /// Measured level indices `(n, m, k, l)`.
    pub levels: [usize; 4],
}

impl CycleSample {
    pub fn work(&self) -> f64 {
        self.w1 + self.w3
    }
}

/// Precomputed sampling tables for one engine between two baths.
#[derive(Debug, Clone)]
pub struct CycleSampler {
    cold_levels: Vec<f64>,
    hot_levels: Vec<f64>,
    cold: WeightedIndex<f64>,
    hot: WeightedIndex<f64>,
    expansion: Vec<Option<WeightedIndex<f64>>>,
    compression: Vec<Option<WeightedIndex<f64>>>,
    /// `Q2` is an integer multiple of the hot quantum.
    ladder: bool,
}

fn table(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|e| Error::Estimation(format!("invalid sampling weights: {e}")))
}

fn row_tables(t: &TransitionMatrix) -> Vec<Option<WeightedIndex<f64>>> {
    (0..t.n_levels()).map(|i| WeightedIndex::new(t.row(i)).ok()).collect()
}

impl CycleSampler {
    /// Harmonic spectra are truncated where the Gibbs and transition tails
    /// fall below `tail`; the discarded mass is renormalized away.
    pub fn new(engine: &EngineModel, baths: &BathPair, tail: f64) -> Result<Self> {
        let chain = MeasurementChain::new(engine, baths, None, tail)?;
        Ok(Self {
            cold: table(&chain.weights.cold)?,
            hot: table(&chain.weights.hot)?,
            expansion: row_tables(&chain.expansion),
            compression: row_tables(&chain.compression),
            cold_levels: chain.weights.cold_levels,
            hot_levels: chain.weights.hot_levels,
            ladder: chain.quanta.is_some(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CycleSample {
        let n = self.cold.sample(rng);
        let m = self.expansion[n].as_ref().map_or(n, |d| d.sample(rng));
        let k = self.hot.sample(rng);
        let l = self.compression[k].as_ref().map_or(k, |d| d.sample(rng));
        CycleSample {
            w1: self.hot_levels[m] - self.cold_levels[n],
            q2: self.hot_levels[k] - self.hot_levels[m],
            w3: self.cold_levels[l] - self.hot_levels[k],
            levels: [n, m, k, l],
        }
    }

    /// Block sums `(Σ Q2, Σ W)` over `s` cycles and whether `Σ Q2` is
    /// exactly zero (decided on integer quanta where the spectrum allows).
    fn block<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> (f64, f64, bool) {
        let mut steps: i64 = 0;
        let mut q = 0.0;
        let mut w = 0.0;
        let mut q_abs = 0.0;
        for _ in 0..s {
            let c = self.sample(rng);
            let [_, m, k, _] = c.levels;
            steps += k as i64 - m as i64;
            q += c.q2;
            q_abs += c.q2.abs();
            w += c.work();
        }
        let zero = if self.ladder {
            steps == 0
        } else {
            q.abs() <= 1e-12 * q_abs
        };
        (q, w, zero)
    }
}

/// One cycle drawn with freshly built tables. Prefer [`CycleSampler`] when
/// drawing many cycles.
pub fn sample_cycle<R: Rng + ?Sized>(engine: &EngineModel, baths: &BathPair, rng: &mut R) -> Result<CycleSample> {
    Ok(CycleSampler::new(engine, baths, DEFAULT_TAIL_TOLERANCE)?.sample(rng))
}

/// Equal-width bins centred on an efficiency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub width: f64,
    pub counts: Vec<u64>,
    /// Efficiencies below the first or above the last bin.
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    /// `n` bins whose centres run from `lo` to `hi`.
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || n < 2 {
            return Err(param("histogram", "need lo < hi and at least two bins"));
        }
        let width = (hi - lo) / (n - 1) as f64;
        Ok(Self {
            centers: (0..n).map(|i| lo + width * i as f64).collect(),
            width,
            counts: vec![0; n],
            underflow: 0,
            overflow: 0,
        })
    }

    /// 101 bins centred on `-0.5, -0.48, …, 1.5`.
    pub fn default_efficiency() -> Self {
        Self::new(-0.5, 1.5, 101).expect("default bins are valid")
    }

    pub fn bin_of(&self, eta: f64) -> Option<usize> {
        let x = (eta - self.centers[0]) / self.width + 0.5;
        (x >= 0.0 && x < self.centers.len() as f64).then_some(x as usize)
    }

    fn add(&mut self, eta: f64) {
        match self.bin_of(eta) {
            Some(i) => self.counts[i] += 1,
            None if eta < self.centers[0] => self.underflow += 1,
            None => self.overflow += 1,
        }
    }
}

/// Efficiencies of `blocks` independent blocks of `s` cycles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockEstimate {
    pub s: usize,
    pub seed: u64,
    pub blocks: usize,
    /// `-ΣW / ΣQ2` of every block with positive heat input, in block order.
    pub eta_values: Vec<f64>,
    /// Blocks with `ΣQ2 ≤ 0`.
    pub excluded: usize,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockConfig {
    pub s: usize,
    pub blocks: usize,
    pub seed: u64,
}

/// Samples `cfg.blocks` blocks in parallel and bins their efficiencies.
pub fn sample_blocks(sampler: &CycleSampler, cfg: &BlockConfig, mut histogram: Histogram) -> Result<BlockEstimate> {
    if cfg.s == 0 || cfg.blocks == 0 {
        return Err(param("blocks", "need s ≥ 1 and at least one block"));
    }
    let sums = par::map_range(0..cfg.blocks, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(b as u64);
        sampler.block(cfg.s, &mut rng)
    });
    let mut eta_values = Vec::with_capacity(sums.len());
    let mut excluded = 0;
    for (q, w, zero) in sums {
        if zero || q <= 0.0 {
            excluded += 1;
        } else {
            let eta = -w / q;
            histogram.add(eta);
            eta_values.push(eta);
        }
    }
    Ok(BlockEstimate {
        s: cfg.s,
        seed: cfg.seed,
        blocks: cfg.blocks,
        eta_values,
        excluded,
        histogram,
    })
}

/// `-ln p̂ / s` in one bin, with a delta-method standard error from the
/// binomial variance of `p̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalRate {
    pub eta: f64,
    pub count: u64,
    pub p_hat: f64,
    pub rate: f64,
    pub std_error: f64,
}

/// Empirical rate per non-empty bin; `p̂` is the bin count over all blocks,
/// excluded ones included.
pub fn empirical_rate(blocks: &BlockEstimate) -> Result<Vec<EmpiricalRate>> {
    if blocks.eta_values.is_empty() {
        return Err(Error::Estimation(format!(
            "all {} blocks have nonpositive heat input",
            blocks.blocks
        )));
    }
    let total = blocks.blocks as f64;
    let s = blocks.s as f64;
    Ok(blocks
        .histogram
        .centers
        .iter()
        .zip(&blocks.histogram.counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&eta, &count)| {
            let p = count as f64 / total;
            EmpiricalRate {
                eta,
                count,
                p_hat: p,
                rate: -p.ln() / s,
                std_error: ((1.0 - p) / (total * p)).sqrt() / s,
            }
        })
        .collect())
}

impl BlockEstimate {
    /// Histogram CSV `eta,count` preceded by `#` lines with the run settings.
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        self.write_header(&mut out)?;
        writeln!(out, "eta,count")?;
        for (c, n) in self.histogram.centers.iter().zip(&self.histogram.counts) {
            writeln!(out, "{},{n}", fmt_num(*c))?;
        }
        Ok(())
    }

    /// Empirical-rate CSV `eta,count,p_hat,rate,std_error`.
    pub fn write_rate_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let rates = empirical_rate(self).map_err(io::Error::other)?;
        self.write_header(&mut out)?;
        writeln!(out, "eta,count,p_hat,rate,std_error")?;
        for r in rates {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_num(r.eta),
                r.count,
                fmt_num(r.p_hat),
                fmt_num(r.rate),
                fmt_num(r.std_error)
            )?;
        }
        Ok(())
    }

    fn write_header<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "# seed = {}", self.seed)?;
        writeln!(out, "# s = {}", self.s)?;
        writeln!(out, "# blocks = {}", self.blocks)?;
        writeln!(out, "# excluded = {}", self.excluded)?;
        writeln!(
            out,
            "# outside = {} below, {} above",
            self.histogram.underflow, self.histogram.overflow
        )
    }
}
