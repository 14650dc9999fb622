//! Fenton–Wilkinson moment matching for a sum of equicorrelated lognormals.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::special_fn::{gaussian_q, ln_gaussian_q};

/// Single lognormal `e^{N(mu_m, sigma_m^2)}` matched to the sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedLognormal {
    pub mu_m: f64,
    pub sigma_m: f64,
}

/// Mean and variance of `Σ_l e^{G_l}`.
pub fn sum_moments(l: usize, rho: f64, mu_g: f64, sigma_g: f64) -> Result<(f64, f64)> {
    if l < 1 {
        return Err(domain("branch count L must be >= 1"));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(domain(format!("rho must lie in [0, 1], got {rho}")));
    }
    if !(sigma_g > 0.0 && sigma_g.is_finite() && mu_g.is_finite()) {
        return Err(domain("need sigma_G > 0 and finite mu_G"));
    }
    let lf = l as f64;
    let s2 = sigma_g * sigma_g;
    let mean = lf * (mu_g + 0.5 * s2).exp();
    let scale = (2.0 * mu_g + s2).exp();
    let var = lf * scale * s2.exp_m1() + lf * (lf - 1.0) * scale * (rho * s2).exp_m1();
    Ok((mean, var))
}

pub fn fenton_wilkinson_match(l: usize, rho: f64, mu_g: f64, sigma_g: f64) -> Result<MatchedLognormal> {
    let (mean, var) = sum_moments(l, rho, mu_g, sigma_g)?;
    let s2 = (var / (mean * mean)).ln_1p();
    Ok(MatchedLognormal { mu_m: mean.ln() - 0.5 * s2, sigma_m: s2.sqrt() })
}

/// `Pr{S <= y}` under the matched lognormal.
pub fn fenton_wilkinson_cdf(l: usize, rho: f64, mu_g: f64, sigma_g: f64, y: f64) -> Result<f64> {
    if y.is_nan() {
        return Err(domain("y is NaN"));
    }
    let m = fenton_wilkinson_match(l, rho, mu_g, sigma_g)?;
    if y <= 0.0 {
        return Ok(0.0);
    }
    gaussian_q((m.mu_m - y.ln()) / m.sigma_m)
}

pub fn ln_fenton_wilkinson_cdf(l: usize, rho: f64, mu_g: f64, sigma_g: f64, y: f64) -> Result<f64> {
    if y.is_nan() {
        return Err(domain("y is NaN"));
    }
    let m = fenton_wilkinson_match(l, rho, mu_g, sigma_g)?;
    if y <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    ln_gaussian_q((m.mu_m - y.ln()) / m.sigma_m)
}
