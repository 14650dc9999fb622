//! Nearest point of an outage region to the latent mean `mu_X·1`.
//!
//! SC is a polyhedral projection solved by enumerating active sets. EGC and
//! MRC have one smooth convex constraint (a log-sum-exp of affine maps); the
//! projection is found by a penalty continuation: for each multiplier `λ`
//! the strictly convex problem `½|x - μ|² + λ h(x)` is minimised by damped
//! Newton, and `λ` is bracketed until `h(x(λ)) = 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::exact::{branch_exponents, region_indicator_log};
use crate::asymptotics::SchemeKind;
use crate::error::{domain, Error, Result};

/// Feasibility tolerance on the log-form constraint.
pub const FEAS_TOL: f64 = 1e-9;
const STARTS: usize = 8;
/// Largest branch count accepted by the numeric search.
pub const MAX_SEARCH_L: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearestPointReport {
    pub scheme: SchemeKind,
    pub closed_form: Vec<f64>,
    pub numeric: Vec<f64>,
    /// Euclidean distance between the two points.
    pub distance_gap: f64,
    /// Indices of binding constraints (SC: branch indices; EGC/MRC: `[0]`).
    pub active_constraints: Vec<usize>,
    /// Largest constraint value at the numeric point (log units).
    pub max_violation: f64,
    /// Largest distance between the minimisers found from different starts.
    pub start_spread: f64,
}

fn check(a: f64, l: usize, gamma_th: f64) -> Result<()> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(domain(format!("nearest points need a finite a > 1, got {a}")));
    }
    if l < 1 {
        return Err(domain("branch count must be >= 1"));
    }
    if !(gamma_th > 0.0 && gamma_th.is_finite()) {
        return Err(domain("gamma_th must be > 0"));
    }
    Ok(())
}

/// Closed-form nearest point: every component `ln sqrt(gamma)/(a+L-1)` for
/// SC, `(ln sqrt(gamma) - ln sqrt(L))/(a+L-1)` for EGC and MRC.
pub fn nearest_point_closed(scheme: SchemeKind, a: f64, l: usize, gamma_th: f64) -> Result<Vec<f64>> {
    check(a, l, gamma_th)?;
    let lf = l as f64;
    let level = match scheme {
        SchemeKind::Sc => 0.5 * gamma_th.ln(),
        SchemeKind::Egc | SchemeKind::Mrc => 0.5 * gamma_th.ln() - 0.5 * lf.ln(),
    };
    Ok(vec![level / (a + lf - 1.0); l])
}

fn mixing_matrix(a: f64, l: usize) -> DMatrix<f64> {
    DMatrix::from_fn(l, l, |i, j| if i == j { a } else { 1.0 })
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

/// Exact projection onto `{x : A x <= c 1}` by active-set enumeration.
fn sc_projection(a: f64, l: usize, gamma_th: f64, mu_x: f64) -> Result<Vec<f64>> {
    let c = 0.5 * gamma_th.ln();
    let mix = mixing_matrix(a, l);
    let mu = DVector::from_element(l, mu_x);
    let feasible = |x: &DVector<f64>| (&mix * x).iter().all(|&v| v - c <= FEAS_TOL);
    if feasible(&mu) {
        return Ok(mu.iter().copied().collect());
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << l) {
        let rows: Vec<usize> = (0..l).filter(|i| mask & (1 << i) != 0).collect();
        let sub = DMatrix::from_fn(rows.len(), l, |r, j| mix[(rows[r], j)]);
        let gram = &sub * sub.transpose();
        let rhs = &sub * &mu - DVector::from_element(rows.len(), c);
        let Some(lambda) = gram.lu().solve(&rhs) else { continue };
        if lambda.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let x = &mu - sub.transpose() * lambda;
        if !feasible(&x) {
            continue;
        }
        let d = (&x - &mu).norm();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.map(|(_, x)| x.iter().copied().collect())
        .ok_or_else(|| Error::SearchFailed("no KKT point satisfies the SC constraints".into()))
}

/// Value, gradient and Hessian of the log-form EGC/MRC constraint.
fn smooth_constraint(
    scheme: SchemeKind,
    x: &DVector<f64>,
    a: f64,
    gamma_th: f64,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let l = x.len();
    let scale = if scheme == SchemeKind::Mrc { 2.0 } else { 1.0 };
    let e = branch_exponents(x.as_slice(), a);
    let m = e.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(scale * v));
    let w_raw: Vec<f64> = e.iter().map(|v| (scale * v - m).exp()).collect();
    let z: f64 = w_raw.iter().sum();
    let w = DVector::from_iterator(l, w_raw.iter().map(|v| v / z));
    let h = m + z.ln()
        - match scheme {
            SchemeKind::Mrc => gamma_th.ln(),
            _ => 0.5 * (l as f64 * gamma_th).ln(),
        };
    let mix = mixing_matrix(a, l);
    let grad = scale * (&mix * &w);
    let cov = DMatrix::from_diagonal(&w) - &w * w.transpose();
    let hess = scale * scale * (&mix * cov * &mix);
    (h, grad, hess)
}

/// Minimises `½|x - μ|² + λ h(x)` from `x0` by damped Newton.
fn penalised_minimiser(
    scheme: SchemeKind,
    a: f64,
    gamma_th: f64,
    mu: &DVector<f64>,
    lambda: f64,
    x0: &DVector<f64>,
) -> Result<DVector<f64>> {
    let objective = |x: &DVector<f64>| {
        let (h, _, _) = smooth_constraint(scheme, x, a, gamma_th);
        0.5 * (x - mu).norm_squared() + lambda * h
    };
    let mut x = x0.clone();
    for _ in 0..200 {
        let (_, g, hess) = smooth_constraint(scheme, &x, a, gamma_th);
        let grad = (&x - mu) + lambda * g;
        if grad.norm() < 1e-14 * (1.0 + mu.norm()) {
            return Ok(x);
        }
        let sys = DMatrix::identity(x.len(), x.len()) + lambda * hess;
        let step = sys
            .cholesky()
            .ok_or_else(|| Error::SearchFailed("penalised Hessian not positive definite".into()))?
            .solve(&grad);
        let f0 = objective(&x);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let trial = &x - t * &step;
            if objective(&trial) <= f0 - 1e-4 * t * slope || t < 1e-12 {
                x = trial;
                break;
            }
            t *= 0.5;
        }
        if (t * step.norm()) < 1e-16 * (1.0 + x.norm()) {
            return Ok(x);
        }
    }
    Ok(x)
}

fn smooth_projection(
    scheme: SchemeKind,
    a: f64,
    gamma_th: f64,
    mu: &DVector<f64>,
    x0: &DVector<f64>,
) -> Result<DVector<f64>> {
    let h_at = |x: &DVector<f64>| smooth_constraint(scheme, x, a, gamma_th).0;
    if h_at(mu) <= 0.0 {
        return Ok(mu.clone());
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut x_hi = penalised_minimiser(scheme, a, gamma_th, mu, hi, x0)?;
    let mut grow = 0;
    while h_at(&x_hi) > 0.0 {
        lo = hi;
        hi *= 4.0;
        x_hi = penalised_minimiser(scheme, a, gamma_th, mu, hi, &x_hi)?;
        grow += 1;
        if grow > 200 {
            return Err(Error::SearchFailed("multiplier bracket did not close".into()));
        }
    }
    let mut x = x_hi.clone();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        x = penalised_minimiser(scheme, a, gamma_th, mu, mid, &x)?;
        let h = h_at(&x);
        if h.abs() < 1e-15 {
            break;
        }
        if h > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x.clone();
        }
    }
    // Keep the feasible side of the bracket when bisection stalls.
    if h_at(&x) > FEAS_TOL {
        x = x_hi;
    }
    Ok(x)
}

/// Starting points: the mean itself, shifted copies, and fixed asymmetric
/// perturbations. None of them uses the closed-form answer.
fn starts(l: usize, mu_x: f64) -> Vec<DVector<f64>> {
    const OFFSETS: [f64; 4] = [0.37, -0.61, 0.83, -0.29];
    (0..STARTS)
        .map(|k| {
            DVector::from_fn(l, |i, _| {
                let shift = -(k as f64) * 0.5 * (1.0 + mu_x.abs());
                let wobble = if k >= 4 { OFFSETS[(i + k) % 4] * (k - 3) as f64 } else { 0.0 };
                mu_x + shift + wobble
            })
        })
        .collect()
}

/// Numerically projects `mu_X·1` onto the outage region and compares the
/// result with [`nearest_point_closed`].
pub fn nearest_point_numeric(
    scheme: SchemeKind,
    a: f64,
    l: usize,
    gamma_th: f64,
    mu_x: f64,
) -> Result<NearestPointReport> {
    check(a, l, gamma_th)?;
    if l > MAX_SEARCH_L {
        return Err(Error::Capability(format!(
            "constrained search is limited to L <= {MAX_SEARCH_L}, got {l}"
        )));
    }
    if !mu_x.is_finite() {
        return Err(domain("mu_X must be finite"));
    }
    let closed = nearest_point_closed(scheme, a, l, gamma_th)?;
    let (numeric, spread) = match scheme {
        SchemeKind::Sc => (sc_projection(a, l, gamma_th, mu_x)?, 0.0),
        SchemeKind::Egc | SchemeKind::Mrc => {
            let mu = DVector::from_element(l, mu_x);
            let mut found: Vec<Vec<f64>> = Vec::with_capacity(STARTS);
            for x0 in starts(l, mu_x) {
                let x = smooth_projection(scheme, a, gamma_th, &mu, &x0)?;
                found.push(x.iter().copied().collect());
            }
            let feasible: Vec<&Vec<f64>> = found
                .iter()
                .filter(|x| region_indicator_log(scheme, x, a, gamma_th).is_ok_and(|v| v <= FEAS_TOL))
                .collect();
            let mu_v = vec![mu_x; l];
            let best = feasible
                .iter()
                .min_by(|p, q| dist(p, &mu_v).total_cmp(&dist(q, &mu_v)))
                .ok_or_else(|| Error::SearchFailed("no start reached a feasible point".into()))?;
            let spread = found
                .iter()
                .flat_map(|p| found.iter().map(move |q| dist(p, q)))
                .fold(0.0, f64::max);
            ((*best).clone(), spread)
        }
    };
    let (active, max_violation) = match scheme {
        SchemeKind::Sc => {
            let c = 0.5 * gamma_th.ln();
            let e = branch_exponents(&numeric, a);
            let active = (0..l).filter(|&i| (e[i] - c).abs() <= FEAS_TOL).collect();
            let worst = e.iter().map(|v| v - c).fold(f64::NEG_INFINITY, f64::max);
            (active, worst)
        }
        _ => {
            let h = region_indicator_log(scheme, &numeric, a, gamma_th)?;
            (if h.abs() <= FEAS_TOL { vec![0] } else { vec![] }, h)
        }
    };
    if max_violation > FEAS_TOL {
        return Err(Error::SearchFailed(format!(
            "numeric point violates the constraint by {max_violation:.3e}"
        )));
    }
    Ok(NearestPointReport {
        scheme,
        distance_gap: dist(&closed, &numeric),
        closed_form: closed,
        numeric,
        active_constraints: active,
        max_violation,
        start_spread: spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A_HALF: f64 = 3.732_050_807_568_877;

    #[test]
    fn sc_dual_branch_matches_closed_form() {
        let r = nearest_point_numeric(SchemeKind::Sc, A_HALF, 2, 0.1, 5.0).unwrap();
        assert!(r.distance_gap < 1e-6, "{r:?}");
        assert_eq!(r.active_constraints, vec![0, 1]);
    }

    #[test]
    fn egc_and_mrc_coincide() {
        for l in 2..=4 {
            let e = nearest_point_numeric(SchemeKind::Egc, A_HALF, l, 0.1, 5.0).unwrap();
            let m = nearest_point_numeric(SchemeKind::Mrc, A_HALF, l, 0.1, 5.0).unwrap();
            assert!(e.distance_gap < 1e-6 && m.distance_gap < 1e-6, "{e:?} {m:?}");
            assert!(dist(&e.numeric, &m.numeric) < 1e-6);
            assert!(e.start_spread < 1e-6);
        }
    }

    #[test]
    fn closed_form_properties() {
        assert!(nearest_point_closed(SchemeKind::Sc, 2.0, 3, 1.0).unwrap().iter().all(|&v| v == 0.0));
        for l in 2..=6 {
            let sc = nearest_point_closed(SchemeKind::Sc, 2.0, l, 0.1).unwrap();
            let egc = nearest_point_closed(SchemeKind::Egc, 2.0, l, 0.1).unwrap();
            assert!(egc.iter().zip(&sc).all(|(e, s)| e < s));
        }
        assert!(nearest_point_closed(SchemeKind::Sc, 1.0, 2, 0.1).is_err());
    }

    #[test]
    fn distance_formulas_hold() {
        for &(a, l, g) in &[(A_HALF, 2usize, 0.1f64), (2.0, 3, 0.5), (10.0, 4, 2.0)] {
            let lf = l as f64;
            let b = a + lf - 1.0;
            for &mu in &[1.0, 5.0, 20.0, 100.0] {
                let mu_v = vec![mu; l];
                let sc = nearest_point_closed(SchemeKind::Sc, a, l, g).unwrap();
                let egc = nearest_point_closed(SchemeKind::Egc, a, l, g).unwrap();
                let x0: Vec<f64> = sc.iter().zip(&egc).map(|(s, e)| 0.5 * (s + e)).collect();
                let d_sc = lf.sqrt() * (mu - 0.5 * g.ln() / b);
                let d_egc = lf.sqrt() * (mu - (0.5 * g.ln() - 0.5 * lf.ln()) / b);
                let d_x0 = lf.sqrt() * (mu - (0.5 * g.ln() - 0.25 * lf.ln()) / b);
                assert!((dist(&sc, &mu_v) - d_sc).abs() < 1e-10);
                assert!((dist(&egc, &mu_v) - d_egc).abs() < 1e-10);
                assert!((dist(&x0, &mu_v) - d_x0).abs() < 1e-10);
                assert!(d_egc > d_x0 && d_x0 > d_sc);
            }
        }
    }

    #[test]
    fn mean_inside_region_is_its_own_projection() {
        let r = nearest_point_numeric(SchemeKind::Egc, 2.0, 2, 10.0, -5.0).unwrap();
        assert_eq!(r.numeric, vec![-5.0, -5.0]);
    }

    #[test]
    fn large_l_is_rejected() {
        assert!(matches!(
            nearest_point_numeric(SchemeKind::Sc, 2.0, 5, 0.1, 5.0),
            Err(Error::Capability(_))
        ));
    }
}
