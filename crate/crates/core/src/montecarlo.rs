//! Seeded Monte Carlo estimates of SC, EGC and MRC outage.
//!
//! Trials are split into batches of `batch_size`; batch `i` draws from
//! substream `i` of the seed, and batch hit counts are summed. Results are
//! therefore identical on the parallel and sequential paths.

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::asymptotics::{db_to_watts, OutageQuery, SchemeKind};
use crate::channel::{derive_seed, draw_exponents, substream, DerivedParams, DEFAULT_BATCH};
use crate::error::{domain, Result};

/// Smallest accepted trial count.
pub const MIN_SAMPLES: usize = 1000;
/// Below this many hits the normal-approximation stderr is flagged.
pub const LOW_COUNT: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub samples: usize,
    pub seed: u64,
    pub batch_size: usize,
}

impl SimConfig {
    /// Uses [`DEFAULT_BATCH`], reduced to `samples` when that is smaller.
    pub fn new(samples: usize, seed: u64) -> Result<Self> {
        let cfg = Self { samples, seed, batch_size: DEFAULT_BATCH.min(samples.max(1)) };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(domain(format!("need at least {MIN_SAMPLES} samples, got {}", self.samples)));
        }
        if self.batch_size < 1 || self.batch_size > self.samples {
            return Err(domain(format!(
                "batch size must lie in [1, samples], got {} for {} samples",
                self.batch_size, self.samples
            )));
        }
        Ok(())
    }

    fn batches(&self) -> usize {
        self.samples.div_ceil(self.batch_size)
    }

    fn batch_len(&self, index: usize) -> usize {
        self.batch_size.min(self.samples - index * self.batch_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateFlag {
    /// Fewer than [`LOW_COUNT`] hits; see the attached interval.
    LowCount,
    /// No hits; the value is the 95% upper bound `3/n`.
    ResolutionExhausted { upper_bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub p_hat: f64,
    /// `sqrt(p(1-p)/n)`.
    pub stderr: f64,
    pub n: u64,
    pub hits: u64,
    pub flag: Option<EstimateFlag>,
    /// Two-sided 95% Clopper–Pearson interval, attached when flagged.
    pub interval: Option<(f64, f64)>,
}

impl SimEstimate {
    pub fn from_counts(hits: u64, n: u64) -> Self {
        let nf = n as f64;
        let p = hits as f64 / nf;
        let stderr = (p * (1.0 - p) / nf).sqrt();
        let (flag, interval) = if hits == 0 {
            (Some(EstimateFlag::ResolutionExhausted { upper_bound: 3.0 / nf }), Some(clopper_pearson(hits, n)))
        } else if hits < LOW_COUNT {
            (Some(EstimateFlag::LowCount), Some(clopper_pearson(hits, n)))
        } else {
            (None, None)
        };
        Self { p_hat: p, stderr, n, hits, flag, interval }
    }
}

/// Two-sided 95% Clopper–Pearson interval for `hits` successes in `n` trials.
pub fn clopper_pearson(hits: u64, n: u64) -> (f64, f64) {
    let (h, nf) = (hits as f64, n as f64);
    let lo = if hits == 0 { 0.0 } else { beta_quantile(h, nf - h + 1.0, 0.025) };
    let hi = if hits == n { 1.0 } else { beta_quantile(h + 1.0, nf - h, 0.975) };
    (lo, hi)
}

/// Quantile of Beta(a, b) by bisection on `ln x`; the regularized
/// incomplete beta is monotone in `x`.
fn beta_quantile(a: f64, b: f64, prob: f64) -> f64 {
    let (mut lo, mut hi) = (-800.0f64, 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid.exp()) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Outage hit counts for SC, EGC and MRC, in that order.
type Counts = [u64; 3];

fn count_batch(p: &DerivedParams, gamma_th: f64, cfg: &SimConfig, index: usize) -> Counts {
    let mut rng = substream(cfg.seed, index as u64);
    let mut g = vec![0.0; p.l];
    let lf = p.l as f64;
    let mut counts = [0u64; 3];
    for _ in 0..cfg.batch_len(index) {
        draw_exponents(p, &mut rng, &mut g);
        let (mut sum, mut sum_sq, mut max_sq) = (0.0, 0.0, 0.0f64);
        for &gl in &g {
            let c = gl.exp();
            sum += c;
            sum_sq += c * c;
            max_sq = max_sq.max(c * c);
        }
        counts[0] += u64::from(max_sq < gamma_th);
        counts[1] += u64::from(sum * sum / lf < gamma_th);
        counts[2] += u64::from(sum_sq < gamma_th);
    }
    counts
}

fn add(a: Counts, b: Counts) -> Counts {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Hit counts computed batch by batch on the calling thread.
pub fn count_outages_sequential(p: &DerivedParams, gamma_th: f64, cfg: &SimConfig) -> Counts {
    (0..cfg.batches()).map(|i| count_batch(p, gamma_th, cfg, i)).fold([0; 3], add)
}

/// Hit counts with batches spread over the rayon pool.
#[cfg(feature = "parallel")]
pub fn count_outages_parallel(p: &DerivedParams, gamma_th: f64, cfg: &SimConfig) -> Counts {
    use rayon::prelude::*;
    (0..cfg.batches()).into_par_iter().map(|i| count_batch(p, gamma_th, cfg, i)).reduce(|| [0; 3], add)
}

fn count_outages(p: &DerivedParams, gamma_th: f64, cfg: &SimConfig) -> Counts {
    #[cfg(feature = "parallel")]
    {
        count_outages_parallel(p, gamma_th, cfg)
    }
    #[cfg(not(feature = "parallel"))]
    {
        count_outages_sequential(p, gamma_th, cfg)
    }
}

fn index(scheme: SchemeKind) -> usize {
    match scheme {
        SchemeKind::Sc => 0,
        SchemeKind::Egc => 1,
        SchemeKind::Mrc => 2,
    }
}

/// Estimates for all three schemes from one shared gain stream, at the
/// received power of `q`.
pub fn simulate_all(params: &DerivedParams, q: &OutageQuery, cfg: &SimConfig) -> Result<[SimEstimate; 3]> {
    cfg.validate()?;
    let p = params.at_received_power(q.er)?;
    let counts = count_outages(&p, q.gamma_th, cfg);
    let n = cfg.samples as u64;
    Ok(counts.map(|h| SimEstimate::from_counts(h, n)))
}

pub fn simulate_outage(params: &DerivedParams, scheme: SchemeKind, q: &OutageQuery, cfg: &SimConfig) -> Result<SimEstimate> {
    Ok(simulate_all(params, q, cfg)?[index(scheme)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub er_db: f64,
    pub seed: u64,
    pub estimate: SimEstimate,
}

/// Seed of grid point `k`, independent of every other point.
pub fn point_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, (k as u64) ^ 0x5157_4545_5000_0000)
}

fn check_grid(er_db: &[f64]) -> Result<()> {
    if er_db.is_empty() {
        return Err(domain("Er grid is empty"));
    }
    if er_db.iter().any(|v| !v.is_finite()) || er_db.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("Er grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// All three schemes over an Er grid (dB re 1 W), common random numbers
/// within each point.
pub fn sweep_all(params: &DerivedParams, gamma_th: f64, er_db: &[f64], cfg: &SimConfig) -> Result<Vec<[SweepPoint; 3]>> {
    check_grid(er_db)?;
    er_db
        .iter()
        .enumerate()
        .map(|(k, &db)| {
            let seed = point_seed(cfg.seed, k);
            let q = OutageQuery::new(gamma_th, db_to_watts(db))?;
            let est = simulate_all(params, &q, &SimConfig { seed, ..*cfg })?;
            Ok(est.map(|estimate| SweepPoint { er_db: db, seed, estimate }))
        })
        .collect()
}

pub fn sweep(
    params: &DerivedParams,
    scheme: SchemeKind,
    gamma_th: f64,
    er_db: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<SweepPoint>> {
    Ok(sweep_all(params, gamma_th, er_db, cfg)?.into_iter().map(|p| p[index(scheme)]).collect())
}
