//! Scalar special functions: Gaussian tail, regularized incomplete gamma and
//! the generalized Marcum-Q function.
//!
//! Marcum-Q is evaluated through the noncentral chi-squared Poisson mixture
//!
//! ```text
//! F(x; k, λ) = Σ_j e^{-λ/2} (λ/2)^j / j! · P(k/2 + j, x/2)
//! Q_M(a, b)  = 1 - F(b²; 2M, a²)
//! ```
//!
//! which handles half-integer orders uniformly. Every kernel has a log-space
//! twin (`ln_*`) so that tails far below `f64::MIN_POSITIVE` stay usable.

use statrs::function::gamma::ln_gamma;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{domain, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Upper bound on series terms and Poisson-mixture terms.
pub const TERM_CAP: usize = 1_000_000;
const CF_MAX_ITER: usize = 100_000;

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite, got {v}")))
    }
}

/// `ln(e^a + e^b)` without overflow; either argument may be `-inf`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{t_i}`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln(1 - e^{x})` for `x <= 0`.
fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Standard normal density.
pub fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Complementary error function via `erfc(x) = Q(1/2, x²)` for `x >= 0`.
pub fn erfc(x: f64) -> Result<f64> {
    check_finite("x", x)?;
    let upper = ln_reg_gamma_upper(0.5, x * x)?.exp();
    Ok(if x >= 0.0 { upper } else { 2.0 - upper })
}

/// `Pr{N(0,1) > x}`.
pub fn gaussian_q(x: f64) -> Result<f64> {
    Ok(0.5 * erfc(x / SQRT_2)?)
}

/// `ln Pr{N(0,1) > x}`, finite for every finite `x`.
pub fn ln_gaussian_q(x: f64) -> Result<f64> {
    check_finite("x", x)?;
    if x <= 0.0 {
        return Ok(gaussian_q(x)?.ln());
    }
    Ok(-std::f64::consts::LN_2 + ln_reg_gamma_upper(0.5, 0.5 * x * x)?)
}

/// Leading-order tail `φ(x)/x`, the classical large-argument form of Q.
pub fn gaussian_q_asym(x: f64) -> Result<f64> {
    check_finite("x", x)?;
    if x <= 0.0 {
        return Err(domain(format!(
            "asymptotic Q form needs x > 0, got {x}"
        )));
    }
    Ok((-0.5 * x * x).exp() / ((2.0 * PI).sqrt() * x))
}

fn check_gamma_args(s: f64, x: f64) -> Result<()> {
    check_finite("s", s)?;
    check_finite("x", x)?;
    if s <= 0.0 {
        return Err(domain(format!("gamma shape must be > 0, got {s}")));
    }
    if x < 0.0 {
        return Err(domain(format!("gamma argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// `ln P(s,x)` by the power series; valid for any x but used for x < s+1.
fn ln_lower_series(s: f64, x: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut denom = s;
    for _ in 0..TERM_CAP {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term < sum * 1e-17 {
            return Ok(s * x.ln() - x - ln_gamma(s + 1.0) + sum.ln());
        }
    }
    Err(Error::NotConverged {
        what: "incomplete gamma series",
        iterations: TERM_CAP,
    })
}

/// `ln Q(s,x)` by the Legendre continued fraction (modified Lentz).
fn ln_upper_cf(s: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..CF_MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok(s * x.ln() - x - ln_gamma(s) + h.ln());
        }
    }
    Err(Error::NotConverged {
        what: "incomplete gamma continued fraction",
        iterations: CF_MAX_ITER,
    })
}

/// `(ln P(s,x), ln Q(s,x))`, each computed on the side where it is accurate.
fn ln_gamma_pair(s: f64, x: f64) -> Result<(f64, f64)> {
    check_gamma_args(s, x)?;
    if x == 0.0 {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    if x < s + 1.0 {
        let lp = ln_lower_series(s, x)?;
        Ok((lp, ln_one_minus_exp(lp)))
    } else {
        let lq = ln_upper_cf(s, x)?;
        Ok((ln_one_minus_exp(lq), lq))
    }
}

/// Regularized lower incomplete gamma `P(s,x) = γ(s,x)/Γ(s)`.
pub fn reg_gamma_lower(s: f64, x: f64) -> Result<f64> {
    ln_gamma_pair(s, x).map(|(lp, _)| lp.exp())
}

/// Regularized upper incomplete gamma `Q(s,x) = 1 - P(s,x)`.
pub fn reg_gamma_upper(s: f64, x: f64) -> Result<f64> {
    ln_gamma_pair(s, x).map(|(_, lq)| lq.exp())
}

pub fn ln_reg_gamma_lower(s: f64, x: f64) -> Result<f64> {
    ln_gamma_pair(s, x).map(|(lp, _)| lp)
}

pub fn ln_reg_gamma_upper(s: f64, x: f64) -> Result<f64> {
    ln_gamma_pair(s, x).map(|(_, lq)| lq)
}

/// `ln[x^s e^{-x} / Γ(s+1)]`, the step between `P(s,x)` and `P(s+1,x)`.
fn ln_gamma_step(s: f64, x: f64) -> f64 {
    s * x.ln() - x - ln_gamma(s + 1.0)
}

fn check_ncx2_args(k: f64, lambda: f64, x: f64) -> Result<()> {
    check_finite("k", k)?;
    check_finite("lambda", lambda)?;
    check_finite("x", x)?;
    if k <= 0.0 {
        return Err(domain(format!("degrees of freedom must be > 0, got {k}")));
    }
    if lambda < 0.0 {
        return Err(domain(format!("noncentrality must be >= 0, got {lambda}")));
    }
    if x < 0.0 {
        return Err(domain(format!("argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// Last Poisson index whose omission leaves < 1e-16 of the mixture weight.
fn poisson_upper_index(h: f64) -> Result<usize> {
    let j = (h + 15.0 * h.sqrt() + 40.0).ceil();
    if j > TERM_CAP as f64 {
        return Err(Error::TermCap { cap: TERM_CAP });
    }
    Ok(j as usize)
}

fn ln_poisson_weight(j: usize, h: f64) -> f64 {
    let jf = j as f64;
    -h + jf * h.ln() - ln_gamma(jf + 1.0)
}

/// Lower mixture `ln Σ w_j P(s0+j, y)`.
///
/// `P(s,y)` decreases in `s`, so the downward recurrence
/// `P(s,y) = P(s+1,y) + y^s e^{-y}/Γ(s+1)` only ever adds positive terms.
fn ln_mixture_lower(s0: f64, y: f64, h: f64) -> Result<f64> {
    let top = poisson_upper_index(h)?;
    let mut ln_p = ln_reg_gamma_lower(s0 + top as f64, y)?;
    let mut terms = Vec::with_capacity(top + 1);
    for j in (0..=top).rev() {
        if j < top {
            ln_p = log_add_exp(ln_p, ln_gamma_step(s0 + j as f64, y));
        }
        terms.push(ln_poisson_weight(j, h) + ln_p);
    }
    Ok(log_sum_exp(&terms))
}

/// Upper mixture `ln Σ w_j Q(s0+j, y)` with the upward recurrence
/// `Q(s+1,y) = Q(s,y) + y^s e^{-y}/Γ(s+1)`.
///
/// `Q(s0+j, y)` grows with `j`, so the sum can be dominated by indices far
/// beyond the Poisson mode; iteration continues until the terms have fallen
/// 40 nats below the running maximum with `Q` already near one.
fn ln_mixture_upper(s0: f64, y: f64, h: f64) -> Result<f64> {
    let top = poisson_upper_index(h)?;
    let mut ln_q = ln_reg_gamma_upper(s0, y)?;
    let mut terms = Vec::with_capacity(top + 1);
    let mut max_term = f64::NEG_INFINITY;
    for j in 0..TERM_CAP {
        if j > 0 {
            ln_q = log_add_exp(ln_q, ln_gamma_step(s0 + (j - 1) as f64, y));
        }
        let t = ln_poisson_weight(j, h) + ln_q;
        max_term = max_term.max(t);
        terms.push(t);
        if j >= top && ln_q > -std::f64::consts::LN_2 && t < max_term - 40.0 {
            return Ok(log_sum_exp(&terms));
        }
    }
    Err(Error::TermCap { cap: TERM_CAP })
}

/// `(ln F, ln(1-F))` for the noncentral chi-squared law; the side below the
/// mean is summed directly and the other obtained by complement.
fn ln_ncx2_pair(k: f64, lambda: f64, x: f64) -> Result<(f64, f64)> {
    check_ncx2_args(k, lambda, x)?;
    if x == 0.0 {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    let (s0, y, h) = (0.5 * k, 0.5 * x, 0.5 * lambda);
    if h == 0.0 {
        return ln_gamma_pair(s0, y);
    }
    if x < k + lambda {
        let lf = ln_mixture_lower(s0, y, h)?;
        Ok((lf, ln_one_minus_exp(lf)))
    } else {
        let ls = ln_mixture_upper(s0, y, h)?;
        Ok((ln_one_minus_exp(ls), ls))
    }
}

/// CDF of the noncentral chi-squared distribution with `k` degrees of
/// freedom and noncentrality `lambda`.
pub fn noncentral_chi2_cdf(k: f64, lambda: f64, x: f64) -> Result<f64> {
    let p = ln_ncx2_pair(k, lambda, x)?.0.exp();
    debug_assert!((0.0..=1.0).contains(&p), "cdf out of range: {p}");
    Ok(p)
}

/// `ln F(x; k, λ)`, accurate in the far left tail.
pub fn ln_noncentral_chi2_cdf(k: f64, lambda: f64, x: f64) -> Result<f64> {
    check_ncx2_args(k, lambda, x)?;
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (s0, y, h) = (0.5 * k, 0.5 * x, 0.5 * lambda);
    if h == 0.0 {
        return ln_reg_gamma_lower(s0, y);
    }
    // The direct lower sum keeps full relative accuracy for small F.
    if x < k + lambda {
        ln_mixture_lower(s0, y, h)
    } else {
        ln_ncx2_pair(k, lambda, x).map(|(lf, _)| lf)
    }
}

/// Survival function `1 - F(x; k, λ)`.
pub fn noncentral_chi2_sf(k: f64, lambda: f64, x: f64) -> Result<f64> {
    let q = ln_ncx2_pair(k, lambda, x)?.1.exp();
    debug_assert!((0.0..=1.0).contains(&q), "sf out of range: {q}");
    Ok(q)
}

/// Arguments of the generalized Marcum-Q function `Q_M(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarcumArgs {
    pub order: f64,
    pub a: f64,
    pub b: f64,
}

impl MarcumArgs {
    pub fn new(order: f64, a: f64, b: f64) -> Result<Self> {
        check_finite("order", order)?;
        check_finite("a", a)?;
        check_finite("b", b)?;
        if order <= 0.0 {
            return Err(domain(format!("Marcum order must be > 0, got {order}")));
        }
        if a < 0.0 || b < 0.0 {
            return Err(domain(format!(
                "Marcum arguments must be >= 0, got a={a}, b={b}"
            )));
        }
        Ok(Self { order, a, b })
    }

    fn chi2(&self) -> (f64, f64, f64) {
        (2.0 * self.order, self.a * self.a, self.b * self.b)
    }
}

/// Generalized Marcum-Q function `Q_M(a, b) = 1 - F(b²; 2M, a²)`.
pub fn marcum_q(args: MarcumArgs) -> Result<f64> {
    let (k, lambda, x) = args.chi2();
    noncentral_chi2_sf(k, lambda, x)
}

/// `1 - Q_M(a, b)`, evaluated directly rather than by subtraction.
pub fn marcum_q_complement(args: MarcumArgs) -> Result<f64> {
    let (k, lambda, x) = args.chi2();
    noncentral_chi2_cdf(k, lambda, x)
}

/// `ln(1 - Q_M(a, b))`.
pub fn ln_marcum_q_complement(args: MarcumArgs) -> Result<f64> {
    let (k, lambda, x) = args.chi2();
    ln_noncentral_chi2_cdf(k, lambda, x)
}
