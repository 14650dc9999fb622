//! Exact reference values: independent SC outage, the two-branch sum CDF by
//! quadrature, and the outage-region functionals in latent coordinates.

use crate::asymptotics::SchemeKind;
use crate::error::{domain, Result};
use crate::quadrature::ln_integrate;
use crate::special_fn::{gaussian_q, ln_gaussian_q};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Exact SC outage over independent branches, `Q((mu_G - ln sqrt(gamma_th))/sigma_G)^L`.
pub fn sc_outage_exact_indep(l: usize, mu_g: f64, sigma_g: f64, gamma_th: f64) -> Result<f64> {
    ln_sc_outage_exact_indep(l, mu_g, sigma_g, gamma_th).map(f64::exp)
}

pub fn ln_sc_outage_exact_indep(l: usize, mu_g: f64, sigma_g: f64, gamma_th: f64) -> Result<f64> {
    if l < 1 || !(sigma_g > 0.0) || !(gamma_th > 0.0) {
        return Err(domain("need L >= 1, sigma_G > 0 and gamma_th > 0"));
    }
    let z = (mu_g - 0.5 * gamma_th.ln()) / sigma_g;
    Ok(l as f64 * ln_gaussian_q(z)?)
}

/// `Pr{e^{G_1} + e^{G_2} <= y}` for a correlated Gaussian pair with common
/// mean `mu_g`, spread `sigma_g` and correlation `rho`.
///
/// Integrates the marginal density of `G_1` against the conditional CDF of
/// `G_2` with absolute tolerance 1e-14 and relative tolerance 1e-10.
pub fn sum2_cdf_quadrature(mu_g: f64, sigma_g: f64, rho: f64, y: f64) -> Result<f64> {
    ln_sum2_cdf_quadrature(mu_g, sigma_g, rho, y, 1e-14, 1e-10).map(|(v, _)| v.exp())
}

/// Log-space version returning `(ln F(y), relative error bound)`.
pub fn ln_sum2_cdf_quadrature(
    mu_g: f64,
    sigma_g: f64,
    rho: f64,
    y: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    if !(sigma_g > 0.0 && mu_g.is_finite()) {
        return Err(domain("need sigma_G > 0 and finite mu_G"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(domain(format!("rho must lie in [0, 1), got {rho}")));
    }
    if y.is_nan() {
        return Err(domain("y is NaN"));
    }
    if y <= 0.0 {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    if y.is_infinite() {
        return Ok((0.0, 0.0));
    }
    let ln_y = y.ln();
    let cond_sd = sigma_g * (1.0 - rho * rho).sqrt();
    let integrand = |g1: f64| {
        let room = ln_y + (-(g1 - ln_y).exp_m1()).ln();
        if room == f64::NEG_INFINITY || room.is_nan() {
            return f64::NEG_INFINITY;
        }
        let z1 = (g1 - mu_g) / sigma_g;
        let cond_mean = mu_g + rho * (g1 - mu_g);
        let ln_cdf = ln_gaussian_q(-(room - cond_mean) / cond_sd).unwrap_or(f64::NEG_INFINITY);
        -0.5 * z1 * z1 - LN_SQRT_2PI - sigma_g.ln() + ln_cdf
    };
    let lower = ln_y.min(mu_g) - 40.0 * sigma_g;
    ln_integrate(integrand, lower, ln_y, abs_tol, rel_tol)
}

/// Branch exponents `a x_l + Σ_{k≠l} x_k` of a latent vector.
pub fn branch_exponents(x: &[f64], a: f64) -> Vec<f64> {
    let total: f64 = x.iter().sum();
    x.iter().map(|&xl| total + (a - 1.0) * xl).collect()
}

fn check_point(x: &[f64], gamma_th: f64) -> Result<()> {
    if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
        return Err(domain("point must be a non-empty finite vector"));
    }
    if !(gamma_th > 0.0) {
        return Err(domain("gamma_th must be > 0"));
    }
    Ok(())
}

/// Outage-region functional; `<= 0` means `x` lies in the outage region.
///
/// SC: `max_l e^{e_l} - sqrt(gamma)`, EGC: `Σ e^{e_l} - sqrt(L gamma)`,
/// MRC: `Σ e^{2 e_l} - gamma`, with `e_l` the branch exponents.
pub fn region_indicator(scheme: SchemeKind, x: &[f64], a: f64, gamma_th: f64) -> Result<f64> {
    check_point(x, gamma_th)?;
    let e = branch_exponents(x, a);
    let lf = x.len() as f64;
    Ok(match scheme {
        SchemeKind::Sc => e.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)).exp() - gamma_th.sqrt(),
        SchemeKind::Egc => e.iter().map(|v| v.exp()).sum::<f64>() - (lf * gamma_th).sqrt(),
        SchemeKind::Mrc => e.iter().map(|v| (2.0 * v).exp()).sum::<f64>() - gamma_th,
    })
}

/// Same sign as [`region_indicator`] but in log units, so it stays finite
/// far from the boundary.
pub fn region_indicator_log(scheme: SchemeKind, x: &[f64], a: f64, gamma_th: f64) -> Result<f64> {
    check_point(x, gamma_th)?;
    let e = branch_exponents(x, a);
    let lse = |scale: f64| {
        let m = e.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(scale * v));
        m + e.iter().map(|v| (scale * v - m).exp()).sum::<f64>().ln()
    };
    let lf = x.len() as f64;
    Ok(match scheme {
        SchemeKind::Sc => e.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - 0.5 * gamma_th.ln(),
        SchemeKind::Egc => lse(1.0) - 0.5 * (lf * gamma_th).ln(),
        SchemeKind::Mrc => lse(2.0) - gamma_th.ln(),
    })
}

/// Single-branch exact outage, `Pr{e^{2G} < gamma_th}`.
pub fn single_branch_outage(mu_g: f64, sigma_g: f64, gamma_th: f64) -> Result<f64> {
    gaussian_q((mu_g - 0.5 * gamma_th.ln()) / sigma_g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;

    #[test]
    fn sc_exact_special_values() {
        let g: f64 = 0.1;
        for l in 1..=5 {
            let p = sc_outage_exact_indep(l, 0.5 * g.ln(), 0.8, g).unwrap();
            assert_relative_eq!(p, 0.5f64.powi(l as i32), max_relative = 1e-15);
        }
        assert_relative_eq!(
            sc_outage_exact_indep(1, 0.3, 0.8, g).unwrap(),
            single_branch_outage(0.3, 0.8, g).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn sum2_cdf_limits() {
        assert_eq!(sum2_cdf_quadrature(0.0, 0.5, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(sum2_cdf_quadrature(0.0, 0.5, 0.0, -1.0).unwrap(), 0.0);
        assert!((sum2_cdf_quadrature(0.0, 0.5, 0.3, 1e6).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sum2_cdf_matches_tensor_quadrature_when_independent() {
        let (mu, sigma) = (0.0, 0.3f64.sqrt());
        let ln_pdf = |g: f64| -0.5 * ((g - mu) / sigma).powi(2) - LN_SQRT_2PI - sigma.ln();
        for &y in &[0.5f64, 1.0, 2.0, 3.0] {
            let ln_y: f64 = y.ln();
            let outer = |g1: f64| {
                let room = y - g1.exp();
                if room <= 0.0 {
                    return 0.0;
                }
                let inner = integrate(|g2| ln_pdf(g2).exp(), mu - 12.0 * sigma, room.ln(), 1e-15, 1e-12)
                    .unwrap()
                    .value;
                ln_pdf(g1).exp() * inner
            };
            let tensor = integrate(outer, mu - 12.0 * sigma, ln_y, 1e-15, 1e-12).unwrap().value;
            let cond = sum2_cdf_quadrature(mu, sigma, 0.0, y).unwrap();
            assert!((tensor - cond).abs() < 1e-9, "y={y}: {tensor} vs {cond}");
        }
    }

    #[test]
    fn sum2_cdf_perfect_correlation_limit() {
        // rho -> 1: e^{G1} + e^{G2} -> 2 e^{G}, so F(y) -> Φ((ln(y/2) - mu)/sigma).
        let f = sum2_cdf_quadrature(0.0, 0.7, 0.999_999, 1.5).unwrap();
        let want = 1.0 - gaussian_q((0.75f64).ln() / 0.7).unwrap();
        assert!((f - want).abs() < 2e-3, "{f} vs {want}");
    }

    #[test]
    fn indicator_vanishes_on_boundary() {
        let (a, g, l) = (3.732_050_807_568_877, 0.1f64, 3usize);
        let b = a + l as f64 - 1.0;
        let sc = vec![0.5 * g.ln() / b; l];
        let egc = vec![(0.5 * g.ln() - 0.5 * (l as f64).ln()) / b; l];
        assert!(region_indicator(SchemeKind::Sc, &sc, a, g).unwrap().abs() < 1e-10);
        assert!(region_indicator(SchemeKind::Egc, &egc, a, g).unwrap().abs() < 1e-10);
        assert!(region_indicator(SchemeKind::Mrc, &egc, a, g).unwrap().abs() < 1e-10);
    }

    #[test]
    fn indicator_permutation_invariant() {
        let x = [0.3, -1.2, 0.05, 0.7];
        let y = [0.7, 0.05, 0.3, -1.2];
        for s in SchemeKind::ALL {
            let u = region_indicator(s, &x, 2.5, 0.3).unwrap();
            let v = region_indicator(s, &y, 2.5, 0.3).unwrap();
            assert!((u - v).abs() <= 1e-14 * u.abs().max(1.0));
            let lu = region_indicator_log(s, &x, 2.5, 0.3).unwrap();
            assert_eq!(lu.signum(), u.signum());
        }
    }

    #[test]
    fn mrc_region_inside_egc_and_sc_regions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut inside = 0;
        for _ in 0..100_000 {
            let l = rng.random_range(2..=4usize);
            let x: Vec<f64> = (0..l).map(|_| rng.random_range(-3.0..1.0)).collect();
            let a = rng.random_range(1.01..20.0);
            let g = rng.random_range(0.01..10.0);
            if region_indicator(SchemeKind::Mrc, &x, a, g).unwrap() <= 0.0 {
                inside += 1;
                assert!(region_indicator(SchemeKind::Egc, &x, a, g).unwrap() <= 0.0, "{x:?} a={a} g={g}");
                assert!(region_indicator(SchemeKind::Sc, &x, a, g).unwrap() <= 0.0, "{x:?} a={a} g={g}");
            }
        }
        assert!(inside > 1000);
    }

    #[test]
    fn egc_region_leaves_sc_region_off_the_diagonal() {
        // One dominant branch: e_1 just inside the EGC level, e_2 far below.
        let (a, g, l) = (2.0f64, 0.1f64, 2.0f64);
        let e1 = 0.5 * (l * g).ln() - 1e-3;
        let e2 = e1 - 30.0;
        let x1 = (a * e1 - e2) / (a * a - 1.0);
        let x2 = (a * e2 - e1) / (a * a - 1.0);
        assert!(region_indicator(SchemeKind::Egc, &[x1, x2], a, g).unwrap() < 0.0);
        assert!(region_indicator(SchemeKind::Sc, &[x1, x2], a, g).unwrap() > 0.0);
    }

    #[test]
    fn egc_boundary_is_inside_sc_region_near_the_diagonal() {
        let (a, g) = (3.732_050_807_568_877, 0.1f64);
        let x_nst = (0.5 * g.ln() - 0.5 * 2f64.ln()) / (a + 1.0);
        for k in -20..=20 {
            let d = 0.01 * k as f64;
            let x = [x_nst + d, x_nst - d];
            if region_indicator(SchemeKind::Egc, &x, a, g).unwrap() <= 0.0 {
                assert!(region_indicator(SchemeKind::Sc, &x, a, g).unwrap() <= 0.0);
            }
        }
    }
}
