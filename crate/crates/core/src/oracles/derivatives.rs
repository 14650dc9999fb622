//! Finite-difference curvature of the EGC boundary and of its osculating
//! sphere at the EGC nearest point, with `x_1` solved as a function of the
//! remaining coordinates.

use serde::Serialize;

use super::exact::branch_exponents;
use crate::error::{domain, Error, Result};

/// Step of the central differences before Richardson extrapolation.
pub const STEP: f64 = 1e-4;
/// Tolerance on every derivative entry.
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    Egc,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeEntry {
    pub surface: Surface,
    /// 1-based coordinate indices; `n` is `None` for first derivatives.
    pub m: usize,
    pub n: Option<usize>,
    pub numeric: f64,
    pub expected: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub a: f64,
    pub l: usize,
    pub gamma_th: f64,
    pub entries: Vec<DerivativeEntry>,
    pub max_abs_error: f64,
    pub pass: bool,
}

struct Geometry {
    a: f64,
    l: usize,
    gamma_th: f64,
    x_nst: f64,
    centre: f64,
    radius: f64,
}

impl Geometry {
    fn new(a: f64, l: usize, gamma_th: f64) -> Self {
        let lf = l as f64;
        let b = a + lf - 1.0;
        let reach = b / (a - 1.0).powi(2);
        let x_nst = 0.5 * (gamma_th / lf).ln() / b;
        Self { a, l, gamma_th, x_nst, centre: x_nst - reach, radius: reach * lf.sqrt() }
    }

    /// Signed surface function in `x_1` and its derivative.
    fn eval(&self, surface: Surface, x: &[f64]) -> (f64, f64) {
        match surface {
            Surface::Egc => {
                let e = branch_exponents(x, self.a);
                let m = e.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let w: Vec<f64> = e.iter().map(|v| (v - m).exp()).collect();
                let z: f64 = w.iter().sum();
                let h = m + z.ln() - 0.5 * (self.l as f64 * self.gamma_th).ln();
                let w1 = w[0] / z;
                (h, w1 * self.a + (1.0 - w1))
            }
            Surface::Sphere => {
                let s: f64 = x.iter().map(|v| (v - self.centre).powi(2)).sum();
                (s - self.radius * self.radius, 2.0 * (x[0] - self.centre))
            }
        }
    }

    /// Root in `x_1` on the branch through the nearest point.
    fn solve_x1(&self, surface: Surface, rest: &[f64]) -> Result<f64> {
        let mut x = Vec::with_capacity(self.l);
        x.push(self.x_nst);
        x.extend_from_slice(rest);
        let f = |x1: f64, x: &mut Vec<f64>| {
            x[0] = x1;
            self.eval(surface, x)
        };
        // Both functions increase in x_1 on the relevant branch, which for
        // the sphere starts at its centre.
        let mut lo = match surface {
            Surface::Egc => self.x_nst - 1.0,
            Surface::Sphere => self.centre,
        };
        let mut hi = self.x_nst + 1.0;
        let mut widen = 0;
        while f(lo, &mut x).0 > 0.0 {
            if surface == Surface::Sphere {
                return Err(Error::SearchFailed("sphere does not reach this slice".into()));
            }
            lo -= 2f64.powi(widen);
            widen += 1;
            if widen > 60 {
                return Err(Error::SearchFailed("no lower bracket for x_1".into()));
            }
        }
        widen = 0;
        while f(hi, &mut x).0 < 0.0 {
            hi += 2f64.powi(widen);
            widen += 1;
            if widen > 60 {
                return Err(Error::SearchFailed("no upper bracket for x_1".into()));
            }
        }
        let mut x1 = self.x_nst.clamp(lo, hi);
        for _ in 0..200 {
            let (v, d) = f(x1, &mut x);
            if v == 0.0 {
                return Ok(x1);
            }
            if v < 0.0 {
                lo = x1;
            } else {
                hi = x1;
            }
            let newton = x1 - v / d;
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - x1).abs() <= 4.0 * f64::EPSILON * x1.abs().max(1e-300) || hi - lo <= f64::EPSILON * hi.abs() {
                return Ok(next);
            }
            x1 = next;
        }
        Err(Error::NotConverged { what: "implicit x_1 root", iterations: 200 })
    }

    fn x1_at(&self, surface: Surface, offsets: &[(usize, f64)]) -> Result<f64> {
        let mut rest = vec![self.x_nst; self.l - 1];
        for &(m, d) in offsets {
            rest[m - 2] += d;
        }
        self.solve_x1(surface, &rest)
    }

    fn first(&self, surface: Surface, m: usize, h: f64) -> Result<f64> {
        let p = self.x1_at(surface, &[(m, h)])?;
        let q = self.x1_at(surface, &[(m, -h)])?;
        Ok((p - q) / (2.0 * h))
    }

    fn second(&self, surface: Surface, m: usize, n: usize, h: f64) -> Result<f64> {
        if m == n {
            let p = self.x1_at(surface, &[(m, h)])?;
            let z = self.x1_at(surface, &[])?;
            let q = self.x1_at(surface, &[(m, -h)])?;
            Ok((p - 2.0 * z + q) / (h * h))
        } else {
            let pp = self.x1_at(surface, &[(m, h), (n, h)])?;
            let pm = self.x1_at(surface, &[(m, h), (n, -h)])?;
            let mp = self.x1_at(surface, &[(m, -h), (n, h)])?;
            let mm = self.x1_at(surface, &[(m, -h), (n, -h)])?;
            Ok((pp - pm - mp + mm) / (4.0 * h * h))
        }
    }
}

fn richardson(f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let coarse = f(STEP)?;
    let fine = f(0.5 * STEP)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Compares numeric first and second implicit derivatives of `x_1` on both
/// surfaces with `-1` and `-(a-1)^2 (1 + [m=n]) / (L-1+a)`.
pub fn implicit_derivative_check(a: f64, l: usize, gamma_th: f64) -> Result<DerivativeReport> {
    if !(a > 1.0 && a.is_finite()) || l < 2 {
        return Err(domain("implicit derivatives need a > 1 and L >= 2"));
    }
    if !(gamma_th > 0.0 && gamma_th.is_finite()) {
        return Err(domain("gamma_th must be > 0"));
    }
    let g = Geometry::new(a, l, gamma_th);
    let curvature = (a - 1.0).powi(2) / (a + l as f64 - 1.0);
    let mut entries = Vec::new();
    let mut push = |surface, m, n: Option<usize>, numeric: f64, expected: f64| {
        entries.push(DerivativeEntry { surface, m, n, numeric, expected, abs_error: (numeric - expected).abs() });
    };
    for surface in [Surface::Egc, Surface::Sphere] {
        for m in 2..=l {
            push(surface, m, None, richardson(|h| g.first(surface, m, h))?, -1.0);
            for n in m..=l {
                let factor = if m == n { 2.0 } else { 1.0 };
                push(surface, m, Some(n), richardson(|h| g.second(surface, m, n, h))?, -factor * curvature);
            }
        }
    }
    let max_abs_error = entries.iter().map(|e| e.abs_error).fold(0.0, f64::max);
    Ok(DerivativeReport { a, l, gamma_th, entries, max_abs_error, pass: max_abs_error <= TOLERANCE })
}
