//! High-SNR closed forms for SC, EGC and MRC outage and for the CDF of a sum
//! of lognormals.
//!
//! Every public probability has a `ln_` twin; the plain version is its
//! exponential. Power is always taken from the query: the `mu_g` stored in
//! [`DerivedParams`] is ignored and `mu_G = ln sqrt(Er) - sigma_G^2` is used.

use std::f64::consts::{LN_10, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{a_from_rho, Correlation, DerivedParams};
use crate::error::{domain, Error, Result};
use crate::special_fn::{ln_gaussian_q, ln_marcum_q_complement, MarcumArgs};

const LG_E: f64 = std::f64::consts::LOG10_E;

/// Combining scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    Sc,
    Egc,
    Mrc,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Sc, SchemeKind::Egc, SchemeKind::Mrc];
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Sc => "SC",
            SchemeKind::Egc => "EGC",
            SchemeKind::Mrc => "MRC",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(SchemeKind::Sc),
            "egc" => Ok(SchemeKind::Egc),
            "mrc" => Ok(SchemeKind::Mrc),
            other => Err(domain(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Outage threshold and operating point, both in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageQuery {
    pub gamma_th: f64,
    pub er: f64,
}

impl OutageQuery {
    pub fn new(gamma_th: f64, er: f64) -> Result<Self> {
        if !(gamma_th.is_finite() && gamma_th > 0.0) {
            return Err(domain(format!("gamma_th must be > 0 W, got {gamma_th}")));
        }
        if !(er.is_finite() && er > 0.0) {
            return Err(domain(format!("Er must be > 0 W, got {er}")));
        }
        Ok(Self { gamma_th, er })
    }

    /// Query at `er_db = 10 lg(Er / 1 W)`.
    pub fn from_db(gamma_th: f64, er_db: f64) -> Result<Self> {
        Self::new(gamma_th, db_to_watts(er_db))
    }
}

pub fn db_to_watts(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn watts_to_db(w: f64) -> f64 {
    10.0 * w.log10()
}

fn check_sigma(sigma_g: f64) -> Result<()> {
    if sigma_g.is_finite() && sigma_g > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("sigma_G must be > 0, got {sigma_g}")))
    }
}

fn check_l(l: usize) -> Result<()> {
    if l >= 1 {
        Ok(())
    } else {
        Err(domain("branch count L must be >= 1"))
    }
}

/// Mixing factor for a correlated formula; `a <= 1` has no valid geometry.
fn mixing(params: &DerivedParams) -> Result<Option<f64>> {
    match params.correlation {
        Correlation::Independent => Ok(None),
        Correlation::Equicorrelated { a } if a > 1.0 => Ok(Some(a)),
        Correlation::Equicorrelated { a } => Err(Error::DegenerateGeometry(format!(
            "mixing factor a = {a} makes the outage region unbounded; treat identical branches as L = 1"
        ))),
    }
}

/// `ln sqrt(Er/gamma_th) - sigma_G^2`, the SC distance variable.
fn sc_margin(sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    let u = 0.5 * (q.er / q.gamma_th).ln() - sigma_g * sigma_g;
    if u > 0.0 {
        Ok(u)
    } else {
        Err(Error::BelowAsymptoticRegime {
            min_er_watts: q.gamma_th * (2.0 * sigma_g * sigma_g).exp(),
        })
    }
}

/// `ln |A|` for the mixing matrix `(a-1)I + J`.
fn ln_det(a: f64, l: usize) -> f64 {
    let lf = l as f64;
    (lf - 1.0) * (a - 1.0).ln() + (a + lf - 1.0).ln()
}

/// Natural log of the correlated SC asymptote, written in `Er` and `sigma_G`.
fn ln_sc_correlated(a: f64, l: usize, sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    let u = sc_margin(sigma_g, q)?;
    let lf = l as f64;
    let b = a + lf - 1.0;
    let s = a * a + lf - 1.0;
    let var = sigma_g * sigma_g;
    Ok(-ln_det(a, l) - 0.5 * lf * (2.0 * PI).ln()
        + 0.5 * lf * (var / s).ln()
        + lf * (2.0 * b.ln() - u.ln())
        - lf * s * u * u / (2.0 * var * b * b))
}

/// SC asymptote written in the latent parameters `(mu_X, sigma_X)`.
///
/// Algebraically identical to the `Er` form once `mu_X = (ln sqrt(Er) -
/// sigma_G^2)/(a+L-1)` and `sigma_X^2 = sigma_G^2/(a^2+L-1)`.
pub fn ln_sc_outage_asym_latent(
    a: f64,
    l: usize,
    mu_x: f64,
    sigma_x: f64,
    gamma_th: f64,
) -> Result<f64> {
    if !(a > 1.0) {
        return Err(Error::DegenerateGeometry(format!("mixing factor must exceed 1, got {a}")));
    }
    check_l(l)?;
    let lf = l as f64;
    let b = a + lf - 1.0;
    let shift = mu_x - gamma_th.ln() / (2.0 * b);
    if !(shift > 0.0) {
        return Err(domain("latent mean must exceed the SC boundary for the asymptote"));
    }
    let var = sigma_x * sigma_x;
    Ok(-ln_det(a, l) - 0.5 * lf * ((2.0 * PI).ln() + var.ln())
        + lf * (var * b / shift).ln()
        - lf / (2.0 * var) * shift * shift)
}

/// `ln` of the independent SC asymptote.
pub fn ln_sc_outage_asym_indep(l: usize, sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    check_l(l)?;
    check_sigma(sigma_g)?;
    let u = sc_margin(sigma_g, q)?;
    let lf = l as f64;
    Ok(lf * (sigma_g.ln() - u.ln()) - 0.5 * lf * (2.0 * PI).ln()
        - lf * u * u / (2.0 * sigma_g * sigma_g))
}

pub fn sc_outage_asym_indep(l: usize, sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    ln_sc_outage_asym_indep(l, sigma_g, q).map(f64::exp)
}

pub fn ln_sc_outage_asym(params: &DerivedParams, q: &OutageQuery) -> Result<f64> {
    check_sigma(params.sigma_g)?;
    if params.l == 1 {
        return ln_single_branch_outage(params.sigma_g, q);
    }
    match mixing(params)? {
        None => ln_sc_outage_asym_indep(params.l, params.sigma_g, q),
        Some(a) => ln_sc_correlated(a, params.l, params.sigma_g, q),
    }
}

/// SC outage asymptote. Errors below `Er = gamma_th e^{2 sigma_G^2}`.
pub fn sc_outage_asym(params: &DerivedParams, q: &OutageQuery) -> Result<f64> {
    ln_sc_outage_asym(params, q).map(f64::exp)
}

/// Sphere offset `(L-1+a)/(1-a)^2` of the EGC/MRC surrogate region.
fn sphere_offset(a: f64, l: usize) -> f64 {
    (l as f64 - 1.0 + a) / ((1.0 - a) * (1.0 - a))
}

/// `ln(1 - Q_{L/2}(p, b))` with `p > 0` enforced; `min_er` is reported otherwise.
fn ln_marcum_cdf(l: usize, p: f64, b: f64, min_er: impl FnOnce() -> f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::BelowAsymptoticRegime { min_er_watts: min_er() });
    }
    ln_marcum_q_complement(MarcumArgs::new(0.5 * l as f64, p, b)?)
}

/// EGC asymptote in latent parameters; MRC reuses it with doubled latents.
pub fn ln_egc_outage_asym_latent(
    a: f64,
    l: usize,
    mu_x: f64,
    sigma_x: f64,
    gamma_th: f64,
) -> Result<f64> {
    if !(a > 1.0) {
        return Err(Error::DegenerateGeometry(format!("mixing factor must exceed 1, got {a}")));
    }
    check_l(l)?;
    let lf = l as f64;
    let b = a + lf - 1.0;
    let c = sphere_offset(a, l);
    let centre = (gamma_th / lf).sqrt().ln() / b - c;
    let p = lf.sqrt() * (mu_x - centre) / sigma_x;
    if !(p > 0.0) {
        return Err(domain("latent mean must lie outside the surrogate sphere centre"));
    }
    ln_marcum_q_complement(MarcumArgs::new(0.5 * lf, p, c * lf.sqrt() / sigma_x)?)
}

fn ln_egc_correlated(a: f64, l: usize, sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    let lf = l as f64;
    let b = a + lf - 1.0;
    let c = sphere_offset(a, l);
    let sigma_x = sigma_g / (a * a + lf - 1.0).sqrt();
    let v = 0.5 * (lf * q.er / q.gamma_th).ln() - sigma_g * sigma_g;
    let p = lf.sqrt() * (v / b + c) / sigma_x;
    let radius = c * lf.sqrt() / sigma_x;
    ln_marcum_cdf(l, p, radius, || {
        q.gamma_th / lf * (2.0 * (sigma_g * sigma_g - c * b)).exp()
    })
}

pub fn ln_egc_outage_asym_indep(l: usize, sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    check_l(l)?;
    check_sigma(sigma_g)?;
    let lf = l as f64;
    let v = 0.5 * (lf * q.er / q.gamma_th).ln() - sigma_g * sigma_g;
    let k = lf.sqrt() / sigma_g;
    ln_marcum_cdf(l, k * (v + 1.0), k, || {
        q.gamma_th / lf * (2.0 * (sigma_g * sigma_g - 1.0)).exp()
    })
}

pub fn egc_outage_asym_indep(l: usize, sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    ln_egc_outage_asym_indep(l, sigma_g, q).map(f64::exp)
}

pub fn ln_egc_outage_asym(params: &DerivedParams, q: &OutageQuery) -> Result<f64> {
    check_sigma(params.sigma_g)?;
    if params.l == 1 {
        return ln_single_branch_outage(params.sigma_g, q);
    }
    match mixing(params)? {
        None => ln_egc_outage_asym_indep(params.l, params.sigma_g, q),
        Some(a) => ln_egc_correlated(a, params.l, params.sigma_g, q),
    }
}

/// EGC outage asymptote (noncentral chi-squared CDF over the surrogate sphere).
pub fn egc_outage_asym(params: &DerivedParams, q: &OutageQuery) -> Result<f64> {
    ln_egc_outage_asym(params, q).map(f64::exp)
}

fn ln_mrc_correlated(a: f64, l: usize, sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    let lf = l as f64;
    let b = a + lf - 1.0;
    let c = sphere_offset(a, l);
    let two_sigma_x = 2.0 * sigma_g / (a * a + lf - 1.0).sqrt();
    let w = (lf * q.er / q.gamma_th).ln() - 2.0 * sigma_g * sigma_g;
    let p = lf.sqrt() * (w / b + c) / two_sigma_x;
    let radius = c * lf.sqrt() / two_sigma_x;
    ln_marcum_cdf(l, p, radius, || {
        q.gamma_th / lf * (2.0 * sigma_g * sigma_g - c * b).exp()
    })
}

pub fn ln_mrc_outage_asym_indep(l: usize, sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    check_l(l)?;
    check_sigma(sigma_g)?;
    let lf = l as f64;
    let w = (lf * q.er / q.gamma_th).ln() - 2.0 * sigma_g * sigma_g;
    let k = lf.sqrt() / (2.0 * sigma_g);
    ln_marcum_cdf(l, k * (w + 1.0), k, || {
        q.gamma_th / lf * (2.0 * sigma_g * sigma_g - 1.0).exp()
    })
}

pub fn mrc_outage_asym_indep(l: usize, sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    ln_mrc_outage_asym_indep(l, sigma_g, q).map(f64::exp)
}

pub fn ln_mrc_outage_asym(params: &DerivedParams, q: &OutageQuery) -> Result<f64> {
    check_sigma(params.sigma_g)?;
    if params.l == 1 {
        return ln_single_branch_outage(params.sigma_g, q);
    }
    match mixing(params)? {
        None => ln_mrc_outage_asym_indep(params.l, params.sigma_g, q),
        Some(a) => ln_mrc_correlated(a, params.l, params.sigma_g, q),
    }
}

/// MRC outage asymptote.
pub fn mrc_outage_asym(params: &DerivedParams, q: &OutageQuery) -> Result<f64> {
    ln_mrc_outage_asym(params, q).map(f64::exp)
}

/// Exact single-branch outage `Pr{e^{2G} < gamma_th}` at the query's power.
/// Every scheme reduces to this when `L = 1`.
pub fn ln_single_branch_outage(sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    check_sigma(sigma_g)?;
    let mu_g = 0.5 * q.er.ln() - sigma_g * sigma_g;
    ln_gaussian_q((mu_g - 0.5 * q.gamma_th.ln()) / sigma_g)
}

pub fn single_branch_outage(sigma_g: f64, q: &OutageQuery) -> Result<f64> {
    ln_single_branch_outage(sigma_g, q).map(f64::exp)
}

pub fn ln_outage_asym(params: &DerivedParams, scheme: SchemeKind, q: &OutageQuery) -> Result<f64> {
    match scheme {
        SchemeKind::Sc => ln_sc_outage_asym(params, q),
        SchemeKind::Egc => ln_egc_outage_asym(params, q),
        SchemeKind::Mrc => ln_mrc_outage_asym(params, q),
    }
}

pub fn outage_asym(params: &DerivedParams, scheme: SchemeKind, q: &OutageQuery) -> Result<f64> {
    ln_outage_asym(params, scheme, q).map(f64::exp)
}

/// `ln Pr{Σ e^{G_l} <= y}` from the EGC surrogate sphere.
///
/// Only defined while the first Marcum argument is positive, i.e. for
/// `y < L e^{mu_G + (a+L-1)(L-1+a)/(1-a)^2}` (`L e^{mu_G + 1}` when `rho = 0`).
pub fn ln_sum_lognormal_cdf_asym(l: usize, rho: f64, mu_g: f64, sigma_g: f64, y: f64) -> Result<f64> {
    check_l(l)?;
    check_sigma(sigma_g)?;
    if !(y.is_finite() && y > 0.0) {
        return Err(domain(format!("y must be > 0, got {y}")));
    }
    if !mu_g.is_finite() {
        return Err(domain("mu_G must be finite"));
    }
    let lf = l as f64;
    let drift = lf.ln() + mu_g - y.ln();
    let (p, radius, reach) = if l == 1 || rho == 0.0 {
        let k = lf.sqrt() / sigma_g;
        (k * (drift + 1.0), k, 1.0)
    } else {
        let a = a_from_rho(rho, l)?;
        let b = a + lf - 1.0;
        let c = sphere_offset(a, l);
        let scale = (a * a + lf - 1.0).sqrt() / sigma_g;
        (lf.sqrt() * (drift / b + c) * scale, c * lf.sqrt() * scale, c * b)
    };
    if !(p > 0.0) {
        return Err(domain(format!(
            "y = {y} is beyond the tail approximation (needs y < {:.6e})",
            lf * (mu_g + reach).exp()
        )));
    }
    ln_marcum_q_complement(MarcumArgs::new(0.5 * lf, p, radius)?)
}

pub fn sum_lognormal_cdf_asym(l: usize, rho: f64, mu_g: f64, sigma_g: f64, y: f64) -> Result<f64> {
    ln_sum_lognormal_cdf_asym(l, rho, mu_g, sigma_g, y).map(f64::exp)
}

/// Split of the SC asymptote into shift and quadratic-slope parts:
/// `lg P = lg oc_ln + term2 + term3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteDecomposition {
    pub oc_ln: f64,
    pub od_ln: f64,
    /// `-L lg(u)` with `u = ln sqrt(Er/gamma_th) - sigma_G^2`.
    pub term2: f64,
    /// `-od_ln u^2`.
    pub term3: f64,
    /// `lg oc_ln`, kept separately since `oc_ln` can overflow for large `a`.
    pub lg_oc_ln: f64,
}

impl AsymptoteDecomposition {
    pub fn lg_outage(&self) -> f64 {
        self.lg_oc_ln + self.term2 + self.term3
    }
}

pub fn sc_asymptote_decomposition(
    params: &DerivedParams,
    q: &OutageQuery,
) -> Result<AsymptoteDecomposition> {
    check_sigma(params.sigma_g)?;
    let u = sc_margin(params.sigma_g, q)?;
    let lf = params.l as f64;
    let var = params.sigma_g * params.sigma_g;
    let (ln_oc, od_ln) = match mixing(params)? {
        None => (
            0.5 * lf * var.ln() - 0.5 * lf * (2.0 * PI).ln(),
            LG_E * lf / (2.0 * var),
        ),
        Some(a) => {
            let b = a + lf - 1.0;
            let s = a * a + lf - 1.0;
            (
                2.0 * lf * b.ln() - ln_det(a, params.l) - 0.5 * lf * (2.0 * PI).ln()
                    + 0.5 * lf * (var / s).ln(),
                LG_E * lf * s / (2.0 * var * b * b),
            )
        }
    };
    Ok(AsymptoteDecomposition {
        oc_ln: ln_oc.exp(),
        od_ln,
        term2: -lf * u.log10(),
        term3: -od_ln * u * u,
        lg_oc_ln: ln_oc / LN_10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{derive_params, ChannelSpec, PowerAnchor};
    use crate::special_fn::{gaussian_q, gaussian_q_asym};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(l: usize, rho: f64, sigma: f64) -> DerivedParams {
        derive_params(&ChannelSpec::new(l, rho, sigma, PowerAnchor::MuG(0.0)).unwrap()).unwrap()
    }

    fn db_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
        let n = ((stop - start) / step).round() as usize;
        (0..=n).map(|i| start + step * i as f64).collect()
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeKind::ALL {
            assert_eq!(s.to_string().parse::<SchemeKind>().unwrap(), s);
        }
        assert!("xyz".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn query_validation() {
        assert!(OutageQuery::new(0.0, 1.0).is_err());
        assert!(OutageQuery::new(1.0, -1.0).is_err());
        assert_relative_eq!(OutageQuery::from_db(0.1, 20.0).unwrap().er, 100.0, max_relative = 1e-14);
    }

    #[test]
    fn independent_mode_dispatches() {
        let p = params(3, 0.0, 0.8);
        let q = OutageQuery::from_db(0.1, 25.0).unwrap();
        assert_eq!(sc_outage_asym(&p, &q).unwrap(), sc_outage_asym_indep(3, 0.8, &q).unwrap());
        assert_eq!(egc_outage_asym(&p, &q).unwrap(), egc_outage_asym_indep(3, 0.8, &q).unwrap());
        assert_eq!(mrc_outage_asym(&p, &q).unwrap(), mrc_outage_asym_indep(3, 0.8, &q).unwrap());
    }

    #[test]
    fn sc_indep_is_gaussian_tail_power() {
        // z = u / sigma = 6 gives Q_asym(6)^2 at L = 2.
        let sigma = 0.8f64;
        let gamma = 0.1f64;
        let u = 6.0 * sigma;
        let er = gamma * (2.0 * (u + sigma * sigma)).exp();
        let q = OutageQuery::new(gamma, er).unwrap();
        assert_relative_eq!(
            sc_outage_asym_indep(2, sigma, &q).unwrap(),
            gaussian_q_asym(6.0).unwrap().powi(2),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            sc_outage_asym_indep(1, sigma, &q).unwrap(),
            gaussian_q_asym(6.0).unwrap(),
            max_relative = 1e-12
        );
        // Exact independent form at z = 8 is within 5 %.
        let u8 = 8.0 * sigma;
        let q8 = OutageQuery::new(gamma, gamma * (2.0 * (u8 + sigma * sigma)).exp()).unwrap();
        let exact = gaussian_q(8.0).unwrap().powi(2);
        let r = sc_outage_asym_indep(2, sigma, &q8).unwrap() / exact;
        assert!((r - 1.0).abs() < 0.05, "{r}");
    }

    #[test]
    fn sc_below_regime_reports_minimum() {
        let p = params(2, 0.5, 0.8);
        let q = OutageQuery::new(0.1, 0.1).unwrap();
        match sc_outage_asym(&p, &q) {
            Err(Error::BelowAsymptoticRegime { min_er_watts }) => {
                assert_relative_eq!(min_er_watts, 0.1 * (2.0f64 * 0.64f64).exp(), max_relative = 1e-14)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sc_latent_form_matches_er_form() {
        for &(l, rho, sigma) in &[(2, 0.5, 0.8), (3, 0.2, 0.9), (4, 0.1, 1.2), (8, 0.7, 0.5)] {
            let p = params(l, rho, sigma);
            let a = p.a().unwrap();
            for db in db_grid(10.0, 60.0, 5.0) {
                let q = OutageQuery::from_db(0.1, db).unwrap();
                let anchored = p.at_received_power(q.er).unwrap();
                let latent =
                    ln_sc_outage_asym_latent(a, l, anchored.mu_x, anchored.sigma_x, q.gamma_th).unwrap();
                let er_form = ln_sc_outage_asym(&p, &q).unwrap();
                assert!((latent - er_form).abs() < 1e-10 * er_form.abs().max(1.0));
            }
        }
    }

    #[test]
    fn sc_fig4_point_is_valid_and_decreasing() {
        let p = params(2, 0.5, 0.8);
        let v = sc_outage_asym(&p, &OutageQuery::from_db(0.1, 40.0).unwrap()).unwrap();
        assert!(v > 0.0 && v < 1.0);
        let mut prev = f64::INFINITY;
        for db in db_grid(0.0, 40.0, 2.0) {
            let v = ln_sc_outage_asym(&p, &OutageQuery::from_db(0.1, db).unwrap()).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn large_a_tracks_independent_at_moderate_power() {
        let p = DerivedParams::with_a(2, 1e3, 0.8, 0.0).unwrap();
        let q = OutageQuery::from_db(0.1, 5.0).unwrap();
        for scheme in SchemeKind::ALL {
            let corr = ln_outage_asym(&p, scheme, &q).unwrap();
            let ind = match scheme {
                SchemeKind::Sc => ln_sc_outage_asym_indep(2, 0.8, &q),
                SchemeKind::Egc => ln_egc_outage_asym_indep(2, 0.8, &q),
                SchemeKind::Mrc => ln_mrc_outage_asym_indep(2, 0.8, &q),
            }
            .unwrap();
            assert!((corr - ind).exp_m1().abs() < 1e-2, "{scheme}: {}", (corr - ind).exp_m1());
        }
    }

    #[test]
    fn a_one_is_degenerate() {
        let p = DerivedParams::with_a(2, 1.0, 0.8, 0.0).unwrap();
        let q = OutageQuery::from_db(0.1, 20.0).unwrap();
        for scheme in SchemeKind::ALL {
            assert!(matches!(
                outage_asym(&p, scheme, &q),
                Err(Error::DegenerateGeometry(_))
            ));
        }
    }

    #[test]
    fn single_branch_short_circuits_every_scheme() {
        let p = DerivedParams::independent(1, 0.8, 0.0).unwrap();
        for db in [0.0, 10.0, 30.0] {
            let q = OutageQuery::from_db(0.1, db).unwrap();
            let exact = single_branch_outage(0.8, &q).unwrap();
            for s in SchemeKind::ALL {
                assert_eq!(outage_asym(&p, s, &q).unwrap(), exact);
            }
        }
    }

    #[test]
    fn egc_l1_matches_single_branch_cdf() {
        // Single-branch exact outage Q((ln sqrt(Er/gamma) - sigma^2)/sigma) near 1e-6.
        let sigma = 0.8f64;
        let gamma = 0.1f64;
        let z = 4.753_424_3;
        let er = gamma * (2.0 * (z * sigma + sigma * sigma)).exp();
        let q = OutageQuery::new(gamma, er).unwrap();
        let exact = gaussian_q(z).unwrap();
        assert!((exact / 1e-6 - 1.0).abs() < 1e-3);
        let asym = egc_outage_asym_indep(1, sigma, &q).unwrap();
        assert!((asym / exact - 1.0).abs() < 0.05, "{}", asym / exact);
    }

    #[test]
    fn mrc_matches_egc_with_doubled_latents() {
        for &(l, rho, sigma) in &[(2, 0.5, 0.8), (3, 0.2, 0.9), (4, 0.1, 1.2)] {
            let p = params(l, rho, sigma);
            let a = p.a().unwrap();
            for db in db_grid(0.0, 40.0, 4.0) {
                let q = OutageQuery::from_db(0.1, db).unwrap();
                let anchored = p.at_received_power(q.er).unwrap();
                let via_egc = ln_egc_outage_asym_latent(
                    a,
                    l,
                    2.0 * anchored.mu_x,
                    2.0 * anchored.sigma_x,
                    q.gamma_th * q.gamma_th / l as f64,
                )
                .unwrap();
                let direct = ln_mrc_outage_asym(&p, &q).unwrap();
                assert!(
                    (via_egc - direct).abs() <= 1e-12 * direct.abs().max(1.0),
                    "{via_egc} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn egc_latent_matches_er_form() {
        let p = params(3, 0.2, 0.9);
        let a = p.a().unwrap();
        for db in db_grid(0.0, 30.0, 3.0) {
            let q = OutageQuery::from_db(0.1, db).unwrap();
            let anchored = p.at_received_power(q.er).unwrap();
            let latent =
                ln_egc_outage_asym_latent(a, 3, anchored.mu_x, anchored.sigma_x, 0.1).unwrap();
            let er_form = ln_egc_outage_asym(&p, &q).unwrap();
            assert!((latent - er_form).abs() <= 1e-12 * er_form.abs().max(1.0));
        }
    }

    #[test]
    fn mrc_below_egc_and_close_at_high_correlation() {
        for &rho in &[0.1, 0.5, 0.9] {
            let p = params(2, rho, 0.8);
            for db in db_grid(0.0, 40.0, 2.0) {
                let q = OutageQuery::from_db(0.1, db).unwrap();
                let egc = ln_egc_outage_asym(&p, &q).unwrap();
                let mrc = ln_mrc_outage_asym(&p, &q).unwrap();
                assert!(mrc <= egc, "rho={rho} db={db}");
                if rho == 0.9 {
                    assert!((egc - mrc) / LN_10 < 0.1, "db={db}: {}", (egc - mrc) / LN_10);
                }
            }
        }
    }

    #[test]
    fn sum_cdf_equals_egc_at_matching_argument() {
        for &(l, rho, sigma) in &[(2, 0.0, 0.8), (2, 0.5, 0.8), (3, 0.2, 0.9), (4, 0.9, 1.2)] {
            let p = params(l, rho, sigma);
            for db in db_grid(0.0, 40.0, 5.0) {
                let q = OutageQuery::from_db(0.1, db).unwrap();
                let mu_g = 0.5 * q.er.ln() - sigma * sigma;
                let y = (l as f64 * q.gamma_th).sqrt();
                let sum = ln_sum_lognormal_cdf_asym(l, rho, mu_g, sigma, y).unwrap();
                let egc = ln_egc_outage_asym(&p, &q).unwrap();
                assert!((sum - egc).abs() <= 1e-12 * egc.abs().max(1.0), "{sum} {egc}");
            }
        }
    }

    #[test]
    fn sum_cdf_rejects_right_region() {
        assert!(sum_lognormal_cdf_asym(2, 0.0, 0.0, 0.5, 6.0).is_err());
        assert!(sum_lognormal_cdf_asym(2, 0.0, 0.0, 0.5, 5.0).is_ok());
        assert!(sum_lognormal_cdf_asym(2, 0.0, 0.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn decomposition_reassembles() {
        for &(l, rho, sigma) in &[(1, 0.0, 0.7), (2, 0.0, 0.8), (2, 0.5, 0.8), (8, 0.3, 1.1)] {
            let p = params(l, rho, sigma);
            for db in db_grid(10.0, 40.0, 5.0) {
                let q = OutageQuery::from_db(0.1, db).unwrap();
                let d = sc_asymptote_decomposition(&p, &q).unwrap();
                // L = 1 short-circuits to the exact CDF; the split is of the closed form.
                let ln_p = if l == 1 { ln_sc_outage_asym_indep(1, sigma, &q) } else { ln_sc_outage_asym(&p, &q) };
                let direct = ln_p.unwrap() / LN_10;
                assert!((d.lg_outage() - direct).abs() < 1e-10 * direct.abs().max(1.0));
                assert_relative_eq!(d.oc_ln.log10(), d.lg_oc_ln, max_relative = 1e-12);
            }
        }
        let d = sc_asymptote_decomposition(
            &params(1, 0.0, 0.7),
            &OutageQuery::from_db(0.1, 20.0).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(d.od_ln, LG_E / (2.0 * 0.49), max_relative = 1e-15);
    }

    #[test]
    fn od_decreases_with_correlation() {
        let q = OutageQuery::from_db(0.1, 30.0).unwrap();
        for l in 2..=6 {
            let mut prev = sc_asymptote_decomposition(&params(l, 0.0, 0.8), &q).unwrap().od_ln;
            for i in 1..20 {
                let od = sc_asymptote_decomposition(&params(l, i as f64 * 0.05, 0.8), &q).unwrap().od_ln;
                assert!(od < prev);
                prev = od;
            }
        }
    }

    #[test]
    fn correlation_penalty_at_high_power() {
        let q = OutageQuery::from_db(0.1, 30.0).unwrap();
        for scheme in SchemeKind::ALL {
            let v: Vec<f64> = [0.1, 0.5, 0.9]
                .iter()
                .map(|&r| ln_outage_asym(&params(2, r, 0.8), scheme, &q).unwrap())
                .collect();
            assert!(v[0] < v[1] && v[1] < v[2], "{scheme}: {v:?}");
        }
    }

    proptest! {
        #[test]
        fn outage_in_unit_interval_and_monotone(
            l in 1usize..=6,
            rho in prop_oneof![Just(0.0), 0.05f64..0.95],
            sigma in 0.3f64..1.5,
            db in 10.0f64..50.0,
            step in 0.1f64..5.0,
            gamma_scale in 1.0f64..3.0,
        ) {
            let p = params(l, rho, sigma);
            let q = OutageQuery::from_db(0.1, db).unwrap();
            let hi = OutageQuery::from_db(0.1, db + step).unwrap();
            let big_gamma = OutageQuery::from_db(0.1 * gamma_scale, db).unwrap();
            for scheme in SchemeKind::ALL {
                let (Ok(v), Ok(v_hi), Ok(v_g)) = (
                    ln_outage_asym(&p, scheme, &q),
                    ln_outage_asym(&p, scheme, &hi),
                    ln_outage_asym(&p, scheme, &big_gamma),
                ) else { continue };
                prop_assert!(v <= 1e-12 || scheme == SchemeKind::Sc);
                if scheme != SchemeKind::Sc {
                    prop_assert!(v <= 0.0);
                }
                prop_assert!(v_hi <= v + 1e-12);
                prop_assert!(v_g >= v - 1e-12);
            }
        }
    }
}
