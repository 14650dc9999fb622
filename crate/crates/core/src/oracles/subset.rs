//! Sampled check that the SC outage region, cut by the ball through
//! `x0 = x_nst - eps·1` around `mu_X·1`, lies inside the slab
//! `ln sqrt(gamma) - delta < a x_l + Σ_{k≠l} x_k < ln sqrt(gamma)` with
//! `delta = L (a + L - 1) eps`.

use rand::Rng;
use serde::Serialize;

use super::exact::branch_exponents;
use crate::channel::substream;
use crate::error::{domain, Result};

/// Fewer accepted points than this makes the check inconclusive.
pub const MIN_ACCEPTED: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetReport {
    pub a: f64,
    pub l: usize,
    pub gamma_th: f64,
    pub eps: f64,
    pub mu_x: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub accepted: usize,
    pub violations: usize,
    /// Accepted points in the outer half of the sampling box.
    pub shell_hits: usize,
    pub inconclusive: bool,
    /// `mu_X > 10 (|ln sqrt(gamma)| + 1)`.
    pub in_regime: bool,
}

/// Infinity norm of the inverse of `(a - 1) I + 1 1ᵀ`.
fn inverse_inf_norm(a: f64, l: usize) -> f64 {
    let lf = l as f64;
    (a + 2.0 * lf - 3.0) / ((a - 1.0) * (a + lf - 1.0))
}

fn run(
    a: f64,
    l: usize,
    gamma_th: f64,
    eps: f64,
    mu_x: f64,
    n_samples: usize,
    seed: u64,
    perm: &[usize],
) -> Result<SubsetReport> {
    if !(a > 1.0 && a.is_finite()) || l < 2 {
        return Err(domain("subset check needs a > 1 and L >= 2"));
    }
    if !(gamma_th > 0.0 && eps > 0.0 && mu_x.is_finite()) {
        return Err(domain("subset check needs gamma_th > 0, eps > 0 and finite mu_X"));
    }
    let lf = l as f64;
    let c = 0.5 * gamma_th.ln();
    let x_nst = c / (a + lf - 1.0);
    let delta = lf * (a + lf - 1.0) * eps;
    let radius2 = lf * (mu_x - x_nst + eps).powi(2);
    let half = 2.0 * inverse_inf_norm(a, l) * delta + eps;

    let mut rng = substream(seed, 0);
    let mut u = vec![0.0; l];
    let mut x = vec![0.0; l];
    let (mut accepted, mut violations, mut shell_hits) = (0, 0, 0);
    for _ in 0..n_samples {
        for v in u.iter_mut() {
            *v = x_nst + half * (2.0 * rng.random::<f64>() - 1.0);
        }
        for (i, &p) in perm.iter().enumerate() {
            x[i] = u[p];
        }
        let in_ball = x.iter().map(|v| (v - mu_x).powi(2)).sum::<f64>() < radius2;
        if !in_ball {
            continue;
        }
        let e = branch_exponents(&x, a);
        if !e.iter().all(|&v| v < c) {
            continue;
        }
        accepted += 1;
        if !e.iter().all(|&v| v > c - delta) {
            violations += 1;
        }
        if x.iter().any(|v| (v - x_nst).abs() > 0.5 * half) {
            shell_hits += 1;
        }
    }
    Ok(SubsetReport {
        a,
        l,
        gamma_th,
        eps,
        mu_x,
        n_samples,
        seed,
        accepted,
        violations,
        shell_hits,
        inconclusive: accepted < MIN_ACCEPTED || shell_hits > 0,
        in_regime: mu_x > 10.0 * (c.abs() + 1.0),
    })
}

/// Rejection-samples the left-hand region uniformly from a box around
/// `x_nst` and counts points that fall outside the slab.
pub fn subset_inclusion_check(
    a: f64,
    l: usize,
    gamma_th: f64,
    eps: f64,
    mu_x: f64,
    n_samples: usize,
    seed: u64,
) -> Result<SubsetReport> {
    let identity: Vec<usize> = (0..l).collect();
    run(a, l, gamma_th, eps, mu_x, n_samples, seed, &identity)
}

/// Same draws as [`subset_inclusion_check`] with the coordinates reversed.
pub fn subset_inclusion_check_permuted(
    a: f64,
    l: usize,
    gamma_th: f64,
    eps: f64,
    mu_x: f64,
    n_samples: usize,
    seed: u64,
) -> Result<SubsetReport> {
    let reversed: Vec<usize> = (0..l).rev().collect();
    run(a, l, gamma_th, eps, mu_x, n_samples, seed, &reversed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    const A: f64 = 3.732_050_807_568_877;

    #[test]
    fn inverse_norm_matches_nalgebra() {
        for l in 2..=5 {
            for &a in &[1.5, A, 20.0] {
                let m = DMatrix::from_fn(l, l, |i, j| if i == j { a } else { 1.0 });
                let inv = m.try_inverse().unwrap();
                let norm = (0..l).map(|i| inv.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
                assert!((norm - inverse_inf_norm(a, l)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn no_violations_in_regime() {
        let r = subset_inclusion_check(A, 2, 0.1, 0.05, 50.0, 200_000, 7).unwrap();
        assert!(r.in_regime && !r.inconclusive, "{r:?}");
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn three_branches() {
        let r = subset_inclusion_check(2.0, 3, 0.1, 0.05, 50.0, 400_000, 11).unwrap();
        assert!(!r.inconclusive, "{r:?}");
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn permutation_gives_same_counts() {
        let r = subset_inclusion_check(A, 2, 0.1, 0.05, 50.0, 100_000, 3).unwrap();
        let p = subset_inclusion_check_permuted(A, 2, 0.1, 0.05, 50.0, 100_000, 3).unwrap();
        assert_eq!((r.accepted, r.violations), (p.accepted, p.violations));
    }

    #[test]
    fn small_mean_is_reported_out_of_regime() {
        let r = subset_inclusion_check(A, 2, 0.1, 0.05, 0.1, 50_000, 5).unwrap();
        assert!(!r.in_regime);
    }
}
