//! Pass/fail runner over the oracle checks, shared by tests and the CLI.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::derivatives::implicit_derivative_check;
use super::lemma::{lemma_ratio, theorem_ratio, LemmaProbe};
use super::nearest::nearest_point_numeric;
use super::subset::{subset_inclusion_check, subset_inclusion_check_permuted};
use crate::asymptotics::{
    ln_egc_outage_asym_indep, ln_mrc_outage_asym_indep, ln_outage_asym, ln_sc_outage_asym_indep, OutageQuery,
    SchemeKind,
};
use crate::channel::{a_from_rho, DerivedParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemma,
    Kkt,
    Subset,
    Derivatives,
    Limits,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Lemma, Suite::Kkt, Suite::Subset, Suite::Derivatives, Suite::Limits];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Lemma => "lemma",
            Suite::Kkt => "kkt",
            Suite::Subset => "subset",
            Suite::Derivatives => "derivatives",
            Suite::Limits => "limits",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|v| v.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown verification suite `{s}`")))
    }
}

/// Parses `all` or one suite name.
pub fn parse_suites(s: &str) -> Result<Vec<Suite>> {
    if s.eq_ignore_ascii_case("all") {
        Ok(Suite::ALL.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub subset_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seed: 1, subset_samples: 400_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

struct Sink {
    suite: Suite,
    checks: Vec<Check>,
}

impl Sink {
    fn push(&mut self, name: String, pass: bool, value: f64, threshold: f64, detail: String) {
        self.checks.push(Check { suite: self.suite, name, pass, value, threshold, detail });
    }

    /// Records a failed check when a computation itself errors.
    fn guard(&mut self, name: &str, r: Result<()>) {
        if let Err(e) = r {
            self.push(name.to_string(), false, f64::NAN, f64::NAN, e.to_string());
        }
    }
}

/// Mixing factor of the two-branch `rho = 0.5` channel.
fn reference_a() -> f64 {
    a_from_rho(0.5, 2).expect("valid correlation")
}

fn lemma_checks(s: &mut Sink) -> Result<()> {
    let grid = vec![5.0, 10.0, 20.0, 40.0];
    let base = LemmaProbe::new(2, 1.0, vec![0.0; 2], 0.1, grid.clone())?;
    let pts = lemma_ratio(&base)?;
    let strictly = pts.windows(2).all(|w| w[1].ln_ratio < w[0].ln_ratio);
    let worst = pts.windows(2).map(|w| w[1].ln_ratio - w[0].ln_ratio).fold(f64::NEG_INFINITY, f64::max);
    s.push("lemma ratio strictly decreasing, L=2".into(), strictly, worst, 0.0, "max ln-step over t=5,10,20,40".into());
    for w in pts.windows(2).filter(|w| w[0].mu_scale >= 10.0) {
        let factor = (w[0].ln_ratio - w[1].ln_ratio).exp();
        s.push(
            format!("lemma ratio decay t={}->{}", w[0].mu_scale, w[1].mu_scale),
            factor > 10.0,
            factor,
            10.0,
            format!("ratios {:.4e} -> {:.4e}", w[0].ratio(), w[1].ratio()),
        );
    }
    let wider = lemma_ratio(&LemmaProbe { eps: 0.2, ..base.clone() })?;
    let smaller = pts.iter().zip(&wider).all(|(n, w)| w.ln_ratio < n.ln_ratio);
    s.push("larger cube lowers the ratio".into(), smaller, 0.2, 0.1, "eps 0.1 vs 0.2".into());

    let three = LemmaProbe::new(3, 1.0, vec![0.0; 3], 0.1, grid)?;
    let pts3 = lemma_ratio(&three)?;
    let ok3 = pts3.windows(2).all(|w| w[1].ln_ratio < w[0].ln_ratio);
    s.push("lemma ratio strictly decreasing, L=3".into(), ok3, pts3[pts3.len() - 1].ln_ratio, 0.0, "ln ratio at t=40".into());

    let th = theorem_ratio(&base)?;
    let ok_th = th.windows(2).all(|w| w[1].ln_ratio < w[0].ln_ratio) && th.iter().all(|p| p.ln_ratio < 0.0);
    s.push("outer/inner cube ratio decreasing and below 1".into(), ok_th, th[th.len() - 1].ln_ratio, 0.0, "ln ratio at t=40".into());
    Ok(())
}

fn kkt_checks(s: &mut Sink) -> Result<()> {
    const GAP: f64 = 1e-6;
    let a = reference_a();
    for l in 2..=4 {
        let sc = nearest_point_numeric(SchemeKind::Sc, a, l, 0.1, 5.0)?;
        s.push(format!("SC nearest point, L={l}"), sc.distance_gap < GAP, sc.distance_gap, GAP, String::new());
        let all_active = sc.active_constraints.len() == l;
        s.push(
            format!("SC constraints all active, L={l}"),
            all_active,
            sc.active_constraints.len() as f64,
            l as f64,
            String::new(),
        );
        let egc = nearest_point_numeric(SchemeKind::Egc, a, l, 0.1, 5.0)?;
        let mrc = nearest_point_numeric(SchemeKind::Mrc, a, l, 0.1, 5.0)?;
        for (r, name) in [(&egc, "EGC"), (&mrc, "MRC")] {
            s.push(
                format!("{name} nearest point, L={l}"),
                r.distance_gap < GAP,
                r.distance_gap,
                GAP,
                format!("start spread {:.3e}", r.start_spread),
            );
        }
        let between: f64 = egc.numeric.iter().zip(&mrc.numeric).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        s.push(format!("EGC and MRC minimisers coincide, L={l}"), between < GAP, between, GAP, String::new());
    }
    Ok(())
}

fn subset_checks(s: &mut Sink, cfg: &VerifyConfig) -> Result<()> {
    let cases = [(reference_a(), 2usize), (2.0, 3)];
    for (a, l) in cases {
        let r = subset_inclusion_check(a, l, 0.1, 0.05, 50.0, cfg.subset_samples, cfg.seed)?;
        s.push(
            format!("slab inclusion at mu_X=50, L={l}"),
            r.violations == 0 && !r.inconclusive && r.in_regime,
            r.violations as f64,
            0.0,
            format!("accepted {} of {}, shell hits {}", r.accepted, r.n_samples, r.shell_hits),
        );
        let p = subset_inclusion_check_permuted(a, l, 0.1, 0.05, 50.0, cfg.subset_samples, cfg.seed)?;
        s.push(
            format!("slab inclusion invariant under relabelling, L={l}"),
            p.violations == r.violations && p.accepted == r.accepted,
            p.violations as f64,
            r.violations as f64,
            format!("accepted {} vs {}", p.accepted, r.accepted),
        );
    }
    Ok(())
}

fn derivative_checks(s: &mut Sink) -> Result<()> {
    for (a, l, g) in [(reference_a(), 2usize, 0.1), (2.5, 3, 0.5), (2.0, 4, 0.1)] {
        let r = implicit_derivative_check(a, l, g)?;
        s.push(
            format!("implicit derivatives, L={l}, a={a:.4}"),
            r.pass,
            r.max_abs_error,
            super::derivatives::TOLERANCE,
            format!("{} entries", r.entries.len()),
        );
    }
    Ok(())
}

/// Largest relative gap between the correlated closed form at mixing factor
/// `a` and the independent closed form, over a grid of `Er` in dB.
pub fn limit_deviation(scheme: SchemeKind, a: f64, l: usize, sigma_g: f64, gamma_th: f64, er_db: &[f64]) -> Result<f64> {
    let params = DerivedParams::with_a(l, a, sigma_g, 0.0)?;
    let mut worst: f64 = 0.0;
    for &db in er_db {
        let q = OutageQuery::from_db(gamma_th, db)?;
        let corr = ln_outage_asym(&params, scheme, &q)?;
        let indep = match scheme {
            SchemeKind::Sc => ln_sc_outage_asym_indep(l, sigma_g, &q)?,
            SchemeKind::Egc => ln_egc_outage_asym_indep(l, sigma_g, &q)?,
            SchemeKind::Mrc => ln_mrc_outage_asym_indep(l, sigma_g, &q)?,
        };
        worst = worst.max((corr - indep).exp_m1().abs());
    }
    Ok(worst)
}

/// The 0 to 40 dB grid in 2 dB steps.
pub fn reference_er_grid() -> Vec<f64> {
    (0..=20).map(|k| 2.0 * k as f64).collect()
}

fn limit_checks(s: &mut Sink) -> Result<()> {
    let grid = reference_er_grid();
    let factors = [1e2, 1e3, 1e4, 1e5];
    for scheme in SchemeKind::ALL {
        let devs: Vec<f64> =
            factors.iter().map(|&a| limit_deviation(scheme, a, 2, 0.8, 0.1, &grid)).collect::<Result<_>>()?;
        let shrinking = devs.windows(2).all(|w| w[1] < w[0]);
        s.push(
            format!("{scheme} correlated form approaches independent form as a grows"),
            shrinking,
            devs[devs.len() - 1],
            devs[0],
            format!(
                "max rel. deviation {} at a = 1e2, 1e3, 1e4, 1e5",
                devs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")
            ),
        );
        let last = devs[devs.len() - 1];
        s.push(format!("{scheme} correlated form at a=1e5 within 1%"), last < 0.01, last, 0.01, String::new());
    }
    Ok(())
}

/// Runs one suite and returns its checks. Errors inside a suite become a
/// failed check rather than aborting the run.
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Vec<Check> {
    let mut sink = Sink { suite, checks: Vec::new() };
    let r = match suite {
        Suite::Lemma => lemma_checks(&mut sink),
        Suite::Kkt => kkt_checks(&mut sink),
        Suite::Subset => subset_checks(&mut sink, cfg),
        Suite::Derivatives => derivative_checks(&mut sink),
        Suite::Limits => limit_checks(&mut sink),
    };
    sink.guard(&format!("{suite} suite completed"), r);
    sink.checks
}

pub fn verify(suites: &[Suite], cfg: &VerifyConfig) -> VerifyReport {
    let checks: Vec<Check> = suites.iter().flat_map(|&s| run_suite(s, cfg)).collect();
    let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
    VerifyReport { seed: cfg.seed, checks, pass }
}
