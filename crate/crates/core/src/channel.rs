//! Equicorrelated lognormal channel model.
//!
//! The L Gaussian exponents are built from L independent latent Gaussians
//! `X_l ~ N(mu_X, sigma_X^2)` as
//!
//! ```text
//! G_l = a·X_l + Σ_{k≠l} X_k
//! ```
//!
//! so that every pair of exponents has correlation
//! `rho = (2a + L - 2)/(a² + L - 1)`. `rho = 0` has no finite `a` and is carried
//! as a separate independent mode in which the exponents are drawn directly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Samples drawn from one substream by [`sample_gains`].
pub const DEFAULT_BATCH: usize = 1 << 16;

/// How the exponent level is pinned down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PowerAnchor {
    /// Mean of each Gaussian exponent, in nats.
    MuG(f64),
    /// Average received electrical power `E[e^{2G}] = e^{2mu_G + 2sigma_G^2}`, in watts.
    ErWatts(f64),
}

/// User-facing channel description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub l: usize,
    pub rho: f64,
    pub sigma_g: f64,
    pub anchor: PowerAnchor,
}

impl ChannelSpec {
    pub fn new(l: usize, rho: f64, sigma_g: f64, anchor: PowerAnchor) -> Result<Self> {
        let spec = Self { l, rho, sigma_g, anchor };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 1 {
            return Err(domain("branch count L must be >= 1"));
        }
        if !(self.rho.is_finite() && (0.0..1.0).contains(&self.rho)) {
            return Err(domain(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.sigma_g.is_finite() && self.sigma_g > 0.0) {
            return Err(domain(format!("sigma_G must be > 0, got {}", self.sigma_g)));
        }
        match self.anchor {
            PowerAnchor::MuG(m) if !m.is_finite() => {
                Err(domain(format!("mu_G must be finite, got {m}")))
            }
            PowerAnchor::ErWatts(e) if !(e.is_finite() && e > 0.0) => {
                Err(domain(format!("Er must be > 0 W, got {e}")))
            }
            _ => Ok(()),
        }
    }
}

/// Correlation structure after resolving `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Correlation {
    /// Exponents are independent; also used for `L = 1`.
    Independent,
    /// Equicorrelated with mixing factor `a >= 1`.
    Equicorrelated { a: f64 },
}

/// Internal equicorrelation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub l: usize,
    pub rho: f64,
    pub sigma_g: f64,
    pub mu_g: f64,
    pub correlation: Correlation,
    /// Latent mean; equals `mu_g` in independent mode.
    pub mu_x: f64,
    /// Latent standard deviation; equals `sigma_g` in independent mode.
    pub sigma_x: f64,
    /// Determinant of the mixing matrix `(a-1)I + J`; 1 in independent mode.
    pub det_a: f64,
}

impl DerivedParams {
    /// Builds parameters from an explicit mixing factor. `a = 1` is allowed
    /// here (all branches identical) even though no `ChannelSpec` maps to it.
    pub fn with_a(l: usize, a: f64, sigma_g: f64, mu_g: f64) -> Result<Self> {
        if l < 2 {
            return Err(domain("an explicit mixing factor needs L >= 2"));
        }
        let rho = rho_from_a(a, l)?;
        if !(sigma_g.is_finite() && sigma_g > 0.0 && mu_g.is_finite()) {
            return Err(domain("sigma_G must be > 0 and mu_G finite"));
        }
        let lf = l as f64;
        Ok(Self {
            l,
            rho,
            sigma_g,
            mu_g,
            correlation: Correlation::Equicorrelated { a },
            mu_x: mu_g / (a + lf - 1.0),
            sigma_x: sigma_g / (a * a + lf - 1.0).sqrt(),
            det_a: det_mixing(a, l),
        })
    }

    pub fn independent(l: usize, sigma_g: f64, mu_g: f64) -> Result<Self> {
        if l < 1 {
            return Err(domain("branch count L must be >= 1"));
        }
        if !(sigma_g.is_finite() && sigma_g > 0.0 && mu_g.is_finite()) {
            return Err(domain("sigma_G must be > 0 and mu_G finite"));
        }
        Ok(Self {
            l,
            rho: 0.0,
            sigma_g,
            mu_g,
            correlation: Correlation::Independent,
            mu_x: mu_g,
            sigma_x: sigma_g,
            det_a: 1.0,
        })
    }

    /// Mixing factor, `None` in independent mode.
    pub fn a(&self) -> Option<f64> {
        match self.correlation {
            Correlation::Independent => None,
            Correlation::Equicorrelated { a } => Some(a),
        }
    }

    /// Average received power `e^{2mu_G + 2sigma_G^2}` in watts.
    pub fn er_watts(&self) -> f64 {
        (2.0 * self.mu_g + 2.0 * self.sigma_g * self.sigma_g).exp()
    }

    /// Same channel re-anchored to average received power `er` (watts).
    pub fn at_received_power(&self, er: f64) -> Result<Self> {
        if !(er.is_finite() && er > 0.0) {
            return Err(domain(format!("Er must be > 0 W, got {er}")));
        }
        let mu_g = mu_g_from_er(er, self.sigma_g);
        let mut out = *self;
        out.mu_g = mu_g;
        out.mu_x = match self.correlation {
            Correlation::Independent => mu_g,
            Correlation::Equicorrelated { a } => mu_g / (a + self.l as f64 - 1.0),
        };
        Ok(out)
    }
}

/// `mu_G = ln sqrt(Er) - sigma_G^2`.
pub fn mu_g_from_er(er: f64, sigma_g: f64) -> f64 {
    0.5 * er.ln() - sigma_g * sigma_g
}

/// `det((a-1)I + J) = (a-1)^{L-1}(a+L-1)`.
pub fn det_mixing(a: f64, l: usize) -> f64 {
    let lf = l as f64;
    (a - 1.0).powi(l as i32 - 1) * (a + lf - 1.0)
}

/// Pairwise exponent correlation for mixing factor `a`.
pub fn rho_from_a(a: f64, l: usize) -> Result<f64> {
    if l < 2 {
        return Err(domain(format!("correlation needs L >= 2, got {l}")));
    }
    if a.is_nan() || a < 1.0 {
        return Err(domain(format!("mixing factor must be >= 1, got {a}")));
    }
    let lf = l as f64;
    if a.is_infinite() {
        return Ok(0.0);
    }
    Ok((2.0 * a + lf - 2.0) / (a * a + lf - 1.0))
}

/// Larger root `a` of `rho(a² + L - 1) = 2a + L - 2`.
pub fn a_from_rho(rho: f64, l: usize) -> Result<f64> {
    if l < 2 {
        return Err(domain(format!("correlation needs L >= 2, got {l}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(domain(format!(
            "rho must lie in (0, 1) for a finite mixing factor, got {rho}"
        )));
    }
    let lf = l as f64;
    let disc = 1.0 - rho * (rho * (lf - 1.0) - lf + 2.0);
    Ok((1.0 + disc.sqrt()) / rho)
}

/// Resolves the correlation mode and latent parameters of `spec`.
pub fn derive_params(spec: &ChannelSpec) -> Result<DerivedParams> {
    spec.validate()?;
    let mu_g = match spec.anchor {
        PowerAnchor::MuG(m) => m,
        PowerAnchor::ErWatts(er) => mu_g_from_er(er, spec.sigma_g),
    };
    if spec.l == 1 || spec.rho == 0.0 {
        return DerivedParams::independent(spec.l, spec.sigma_g, mu_g);
    }
    let a = a_from_rho(spec.rho, spec.l)?;
    let mut p = DerivedParams::with_a(spec.l, a, spec.sigma_g, mu_g)?;
    // Keep the user's rho rather than the round-tripped value.
    p.rho = spec.rho;
    Ok(p)
}

/// One draw of the L channel coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSample {
    /// Linear amplitudes `c_l = e^{G_l}`.
    pub gains: Vec<f64>,
    /// Gaussian exponents `G_l` in nats.
    pub latent: Vec<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(seed ^ splitmix64(index))`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Generator for batch `index` under `seed`: ChaCha8 keyed by
/// [`derive_seed`].
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}

/// Writes one vector of exponents into `out` (length L).
///
/// Consumes exactly L standard normals from `rng`.
#[inline]
pub fn draw_exponents<R: rand::Rng + ?Sized>(p: &DerivedParams, rng: &mut R, out: &mut [f64]) {
    debug_assert_eq!(out.len(), p.l);
    match p.correlation {
        Correlation::Independent => {
            for g in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *g = p.mu_g + p.sigma_g * z;
            }
        }
        Correlation::Equicorrelated { a } => {
            let mut total = 0.0;
            for x in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *x = p.mu_x + p.sigma_x * z;
                total += *x;
            }
            for g in out.iter_mut() {
                *g = total + (a - 1.0) * *g;
            }
        }
    }
}

/// Deterministic stream of `n` gain vectors.
///
/// Sample `i` comes from substream `i / DEFAULT_BATCH` of `seed`, so the
/// stream matches a Monte Carlo run with the same seed and batch size.
pub fn sample_gains(p: &DerivedParams, n: usize, seed: u64) -> Result<GainStream> {
    if n == 0 {
        return Err(domain("sample count must be >= 1"));
    }
    Ok(GainStream {
        params: *p,
        seed,
        remaining: n,
        drawn: 0,
        rng: substream(seed, 0),
    })
}

/// Iterator returned by [`sample_gains`].
pub struct GainStream {
    params: DerivedParams,
    seed: u64,
    remaining: usize,
    drawn: usize,
    rng: ChaCha8Rng,
}

impl Iterator for GainStream {
    type Item = GainSample;

    fn next(&mut self) -> Option<GainSample> {
        if self.remaining == 0 {
            return None;
        }
        if self.drawn > 0 && self.drawn.is_multiple_of(DEFAULT_BATCH) {
            self.rng = substream(self.seed, (self.drawn / DEFAULT_BATCH) as u64);
        }
        let mut latent = vec![0.0; self.params.l];
        draw_exponents(&self.params, &mut self.rng, &mut latent);
        self.remaining -= 1;
        self.drawn += 1;
        let gains = latent.iter().map(|g| g.exp()).collect();
        Some(GainSample { gains, latent })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for GainStream {}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn direct_det(a: f64, l: usize) -> f64 {
        DMatrix::from_fn(l, l, |i, j| if i == j { a } else { 1.0 }).determinant()
    }

    #[test]
    fn rho_limits() {
        for l in 2..=8 {
            assert_eq!(rho_from_a(1.0, l).unwrap(), 1.0);
            assert!(rho_from_a(1e9, l).unwrap() < 1e-8);
        }
        assert!(rho_from_a(0.5, 2).is_err());
    }

    #[test]
    fn rho_half_dual_branch() {
        // 2 + sqrt(3) solves a² - 4a + 1 = 0, the L = 2, rho = 1/2 equation.
        let a = 2.0 + 3.0f64.sqrt();
        assert_relative_eq!(rho_from_a(a, 2).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(a_from_rho(0.5, 2).unwrap(), a, max_relative = 1e-15);
        assert_relative_eq!(a, 3.732051, max_relative = 1e-6);
    }

    #[test]
    fn a_from_rho_near_one() {
        for l in 2..=8 {
            let a = a_from_rho(1.0 - 1e-12, l).unwrap();
            assert!((a - 1.0).abs() < 1e-5, "{a}");
        }
        assert!(a_from_rho(0.0, 2).is_err());
        assert!(a_from_rho(1.0, 2).is_err());
    }

    #[test]
    fn round_trip_grid() {
        for l in 2..=8 {
            for i in 1..=99 {
                let rho = i as f64 / 100.0;
                let back = rho_from_a(a_from_rho(rho, l).unwrap(), l).unwrap();
                assert!((back - rho).abs() < 1e-12, "L={l} rho={rho} back={back}");
            }
        }
    }

    #[test]
    fn rho_decreasing_in_a() {
        for l in 2..=8 {
            let mut prev = 1.0;
            for i in 1..=400 {
                let a = 1.0 + 0.05 * i as f64;
                let r = rho_from_a(a, l).unwrap();
                assert!(r < prev);
                prev = r;
            }
        }
    }

    #[test]
    fn det_matches_direct() {
        for l in 2..=6 {
            for &a in &[1.5, 3.732, 10.0, 1e3] {
                assert_relative_eq!(det_mixing(a, l), direct_det(a, l), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn derived_identities() {
        let spec = ChannelSpec::new(2, 0.5, 1.0, PowerAnchor::MuG(0.0)).unwrap();
        let p = derive_params(&spec).unwrap();
        assert_relative_eq!(p.sigma_x, 0.258_819, max_relative = 1e-5);
        let a = p.a().unwrap();
        assert_relative_eq!(p.sigma_x, 1.0 / (a * a + 1.0).sqrt(), max_relative = 1e-15);

        for l in 2..=8 {
            for &rho in &[0.1, 0.5, 0.9] {
                let spec = ChannelSpec::new(l, rho, 0.8, PowerAnchor::MuG(1.7)).unwrap();
                let p = derive_params(&spec).unwrap();
                let a = p.a().unwrap();
                let lf = l as f64;
                assert!(((a + lf - 1.0) * p.mu_x - p.mu_g).abs() < 1e-12);
                assert_relative_eq!((a * a + lf - 1.0) * p.sigma_x.powi(2), 0.64, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn er_anchor() {
        let sigma = 0.8;
        let spec =
            ChannelSpec::new(3, 0.2, sigma, PowerAnchor::ErWatts((2.0 * sigma * sigma).exp())).unwrap();
        let p = derive_params(&spec).unwrap();
        assert!(p.mu_g.abs() < 1e-15);
        let q = p.at_received_power(100.0).unwrap();
        assert_relative_eq!(q.er_watts(), 100.0, max_relative = 1e-14);
        assert_relative_eq!(q.mu_x * (q.a().unwrap() + 2.0), q.mu_g, max_relative = 1e-14);
    }

    #[test]
    fn independent_modes() {
        let spec = ChannelSpec::new(3, 0.0, 0.7, PowerAnchor::MuG(0.4)).unwrap();
        let p = derive_params(&spec).unwrap();
        assert_eq!(p.correlation, Correlation::Independent);
        assert_eq!((p.mu_x, p.sigma_x), (0.4, 0.7));
        let single = derive_params(&ChannelSpec::new(1, 0.6, 0.7, PowerAnchor::MuG(0.4)).unwrap()).unwrap();
        assert_eq!(single.correlation, Correlation::Independent);
    }

    #[test]
    fn spec_validation() {
        assert!(ChannelSpec::new(0, 0.1, 1.0, PowerAnchor::MuG(0.0)).is_err());
        assert!(ChannelSpec::new(2, 1.0, 1.0, PowerAnchor::MuG(0.0)).is_err());
        assert!(ChannelSpec::new(2, -0.1, 1.0, PowerAnchor::MuG(0.0)).is_err());
        assert!(ChannelSpec::new(2, 0.1, 0.0, PowerAnchor::MuG(0.0)).is_err());
        assert!(ChannelSpec::new(2, 0.1, 1.0, PowerAnchor::ErWatts(0.0)).is_err());
    }

    #[test]
    fn identical_branches_at_a_one() {
        let p = DerivedParams::with_a(4, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(p.rho, 1.0);
        for s in sample_gains(&p, 100, 9).unwrap() {
            assert!(s.latent.iter().all(|&g| g == s.latent[0]));
        }
    }

    #[test]
    fn sampling_is_deterministic_and_positive() {
        let p = DerivedParams::with_a(3, 2.5, 0.9, -0.3).unwrap();
        let a: Vec<_> = sample_gains(&p, 1000, 42).unwrap().collect();
        let b: Vec<_> = sample_gains(&p, 1000, 42).unwrap().collect();
        assert_eq!(a, b);
        let c: Vec<_> = sample_gains(&p, 1000, 43).unwrap().collect();
        assert_ne!(a, c);
        for s in &a {
            for (g, x) in s.gains.iter().zip(&s.latent) {
                assert!(*g > 0.0);
                assert_eq!(*g, x.exp());
            }
        }
        assert!(sample_gains(&p, 0, 1).is_err());
    }

    #[test]
    fn sample_moments() {
        let n = 1_000_000;
        let (l, rho, sigma, mu) = (3, 0.5, 1.0, 0.25);
        let spec = ChannelSpec::new(l, rho, sigma, PowerAnchor::MuG(mu)).unwrap();
        let p = derive_params(&spec).unwrap();
        let mut sum = vec![0.0; l];
        let mut cross = vec![vec![0.0; l]; l];
        let mut power = 0.0;
        for s in sample_gains(&p, n, 7).unwrap() {
            for i in 0..l {
                sum[i] += s.latent[i];
                for j in 0..l {
                    cross[i][j] += s.latent[i] * s.latent[j];
                }
            }
            power += s.gains[0] * s.gains[0];
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        for m in &mean {
            assert!((m - mu).abs() < 4.0 * sigma / 1e3, "{m}");
        }
        for i in 0..l {
            for j in 0..l {
                let cov = cross[i][j] / nf - mean[i] * mean[j];
                let want = if i == j { sigma * sigma } else { rho * sigma * sigma };
                assert!((cov - want).abs() < 0.01, "cov[{i}][{j}] = {cov}");
            }
        }
        let er = power / nf;
        assert!((er / p.er_watts() - 1.0).abs() < 0.02, "{er} vs {}", p.er_watts());
    }

    proptest! {
        #[test]
        fn round_trip_random(rho in 0.001f64..0.999, l in 2usize..=16) {
            let back = rho_from_a(a_from_rho(rho, l).unwrap(), l).unwrap();
            prop_assert!((back - rho).abs() < 1e-12);
        }

        #[test]
        fn rho_in_unit_interval(a in 1.0f64..1e6, l in 2usize..=16) {
            let r = rho_from_a(a, l).unwrap();
            prop_assert!(r > 0.0 && r <= 1.0);
        }
    }
}
