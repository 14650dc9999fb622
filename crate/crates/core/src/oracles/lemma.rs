//! Tail-versus-hypercube probability ratios for an isotropic Gaussian whose
//! mean `μ = t·1` is pushed away from a fixed probe point.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::quadrature::ln_integrate;
use crate::special_fn::ln_reg_gamma_upper;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// Log-magnitudes below this are flagged as hard underflow.
pub const LN_UNDERFLOW: f64 = -700.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaProbe {
    pub l: usize,
    pub sigma: f64,
    pub x0: Vec<f64>,
    pub eps: f64,
    pub mu_scales: Vec<f64>,
}

impl LemmaProbe {
    pub fn new(l: usize, sigma: f64, x0: Vec<f64>, eps: f64, mu_scales: Vec<f64>) -> Result<Self> {
        let p = Self { l, sigma, x0, eps, mu_scales };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.l) {
            return Err(domain(format!("probe dimension must be 2 or 3, got {}", self.l)));
        }
        if self.x0.len() != self.l || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(domain("x0 must be a finite vector of length L"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(domain("sigma must be > 0"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(domain("eps must be > 0"));
        }
        if self.mu_scales.is_empty() || self.mu_scales.iter().any(|t| !t.is_finite()) {
            return Err(domain("mu_scale grid must be non-empty and finite"));
        }
        if self.mu_scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("mu_scale grid must be strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioPoint {
    pub mu_scale: f64,
    pub ln_numerator: f64,
    pub ln_denominator: f64,
    pub ln_ratio: f64,
    /// Either integral fell below `e^-700`.
    pub underflow: bool,
}

impl RatioPoint {
    fn new(mu_scale: f64, ln_numerator: f64, ln_denominator: f64) -> Self {
        Self {
            mu_scale,
            ln_numerator,
            ln_denominator,
            ln_ratio: ln_numerator - ln_denominator,
            underflow: ln_numerator < LN_UNDERFLOW || ln_denominator < LN_UNDERFLOW,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.ln_ratio.exp()
    }
}

/// `ln Pr{x in the cube of half-width eps around centre}` for
/// `x ~ N(mu·1, sigma² I)`, as a product of one-dimensional quadratures.
pub fn ln_cube_probability(centre: &[f64], eps: f64, mu: f64, sigma: f64) -> Result<f64> {
    let mut total = 0.0;
    for &c in centre {
        let ln_phi = |x: f64| {
            let z = (x - mu) / sigma;
            -0.5 * z * z - LN_SQRT_2PI - sigma.ln()
        };
        let (v, _) = ln_integrate(ln_phi, c - eps, c + eps, 0.0, 1e-12)?;
        total += v;
    }
    Ok(total)
}

/// `ln Pr{|x - μ| > r}` for an isotropic L-variate Gaussian.
pub fn ln_ball_tail(l: usize, sigma: f64, r: f64) -> Result<f64> {
    ln_reg_gamma_upper(0.5 * l as f64, r * r / (2.0 * sigma * sigma))
}

fn distance_to_mean(x: &[f64], t: f64) -> f64 {
    x.iter().map(|v| (v - t).powi(2)).sum::<f64>().sqrt()
}

/// Ratio of the probability outside the ball of radius
/// `|x0 - μ| + sqrt(L)·eps + eps` to the probability of the cube around `x0`,
/// for every `t` on the probe grid.
pub fn lemma_ratio(probe: &LemmaProbe) -> Result<Vec<RatioPoint>> {
    probe.validate()?;
    let lf = probe.l as f64;
    probe
        .mu_scales
        .iter()
        .map(|&t| {
            let r = distance_to_mean(&probe.x0, t) + lf.sqrt() * probe.eps + probe.eps;
            let num = ln_ball_tail(probe.l, probe.sigma, r)?;
            let den = ln_cube_probability(&probe.x0, probe.eps, t, probe.sigma)?;
            Ok(RatioPoint::new(t, num, den))
        })
        .collect()
}

/// Ratio of two equal cubes: one just outside the sphere through `x0`
/// centred on `μ`, one just inside it, both on the line through `x0` and `μ`.
/// The cubes sit `2·sqrt(L)·eps` from `x0`, which keeps each wholly on its side.
pub fn theorem_ratio(probe: &LemmaProbe) -> Result<Vec<RatioPoint>> {
    probe.validate()?;
    let lf = probe.l as f64;
    let shift = 2.0 * lf.sqrt() * probe.eps;
    probe
        .mu_scales
        .iter()
        .map(|&t| {
            let d = distance_to_mean(&probe.x0, t);
            if d <= shift + lf.sqrt() * probe.eps {
                return Err(domain(format!("mu_scale {t} places the mean too close to x0")));
            }
            let unit: Vec<f64> = probe.x0.iter().map(|v| (t - v) / d).collect();
            let far: Vec<f64> = probe.x0.iter().zip(&unit).map(|(v, u)| v - shift * u).collect();
            let near: Vec<f64> = probe.x0.iter().zip(&unit).map(|(v, u)| v + shift * u).collect();
            let num = ln_cube_probability(&far, probe.eps, t, probe.sigma)?;
            let den = ln_cube_probability(&near, probe.eps, t, probe.sigma)?;
            Ok(RatioPoint::new(t, num, den))
        })
        .collect()
}
