use std::f64::consts::{E, FRAC_2_PI, PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

use super::quadrature::integrate;

const SQRT_3: f64 = 1.732_050_807_568_877_2;
/// Gaussian noise is integrated over `|e| ≤ GAUSS_CUTOFF`; the tail mass
/// beyond is below 1e-32.
const GAUSS_CUTOFF: f64 = 12.0;
const BISECTION_STEPS: usize = 200;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Law of the standardized noise `ε`. Sub-Gaussian kinds have mean zero and
/// unit variance; `StudentT` is the raw t law and is only meant for
/// heavy-tail experiments outside Model 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseDist {
    Gaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    Uniform,
    StudentT { df: f64 },
}

impl Default for NoiseDist {
    fn default() -> Self {
        NoiseDist::Gaussian
    }
}

impl NoiseDist {
    pub fn is_sub_gaussian(&self) -> bool {
        !matches!(self, NoiseDist::StudentT { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseDist::StudentT { df } if !(df > 0.0) => {
                Err(Error::invalid(format!("student_t needs df > 0, got {df}")))
            }
            _ => Ok(()),
        }
    }

    fn require_sub_gaussian(&self) -> Result<()> {
        if self.is_sub_gaussian() {
            Ok(())
        } else {
            Err(Error::UnsupportedDistribution(format!(
                "{self:?} is not sub-Gaussian"
            )))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseDist::Gaussian => StandardNormal.sample(rng),
            NoiseDist::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseDist::Uniform => rng.random_range(-SQRT_3..SQRT_3),
            NoiseDist::StudentT { df } => StudentT::new(df).expect("validated df").sample(rng),
        }
    }

    /// `E[ε²]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            NoiseDist::StudentT { df } if df > 2.0 => df / (df - 2.0),
            NoiseDist::StudentT { .. } => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// `E[g(|ε|)]` for a sub-Gaussian kind. `scale` marks where `g` changes
    /// fastest and is used as a panel breakpoint.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G, scale: f64) -> Result<f64> {
        self.require_sub_gaussian()?;
        let split = |hi: f64, h: &dyn Fn(f64) -> f64| {
            let s = scale.abs();
            if s > 0.0 && s < hi {
                integrate(h, 0.0, s) + integrate(h, s, hi)
            } else {
                integrate(h, 0.0, hi)
            }
        };
        Ok(match self {
            NoiseDist::Gaussian => 2.0 * split(GAUSS_CUTOFF, &|e| g(e) * normal_pdf(e)),
            NoiseDist::Rademacher => g(1.0),
            NoiseDist::Uniform => split(SQRT_3, &|e| g(e)) / SQRT_3,
            NoiseDist::StudentT { .. } => unreachable!(),
        })
    }

    /// `E|ε|`.
    pub fn abs_mean(&self) -> Result<f64> {
        match self {
            NoiseDist::Gaussian => Ok(FRAC_2_PI.sqrt()),
            NoiseDist::Rademacher => Ok(1.0),
            NoiseDist::Uniform => Ok(SQRT_3 / 2.0),
            NoiseDist::StudentT { .. } => Err(self.require_sub_gaussian().unwrap_err()),
        }
    }

    /// `‖ε‖_{ψ₂} = inf{s > 0 : E exp(ε²/s²) ≤ e}`.
    pub fn psi2_norm(&self) -> Result<f64> {
        self.require_sub_gaussian()?;
        match self {
            NoiseDist::Gaussian => Ok((2.0 / (1.0 - (-2.0f64).exp())).sqrt()),
            NoiseDist::Rademacher => Ok(1.0),
            _ => root_decreasing(
                |s| {
                    self.expect(|e| (e * e / (s * s)).exp(), 0.0)
                        .expect("sub-Gaussian")
                        - E
                },
                0.2,
                20.0,
            ),
        }
    }

    /// `‖εz‖_{ψ₁}` for `z ~ N(0,1)` independent of `ε`, i.e. the `s` solving
    /// `E exp(|εz|/s) = e`. The inner expectation over `z` is
    /// `2·exp(c²/2)·Φ(c)` with `c = |ε|/s`.
    pub fn product_psi1_norm(&self) -> Result<f64> {
        self.require_sub_gaussian()?;
        let mgf = |s: f64| -> f64 {
            match self {
                // closed form of the Gaussian integral, finite for s > 1
                NoiseDist::Gaussian => {
                    let a = 1.0 - 1.0 / (s * s);
                    (1.0 + FRAC_2_PI * (1.0 / (s * s - 1.0).sqrt()).atan()) / a.sqrt()
                }
                _ => self
                    .expect(|e| 2.0 * (e * e / (2.0 * s * s)).exp() * normal_cdf(e / s), s)
                    .expect("sub-Gaussian"),
            }
        };
        let lo = match self {
            NoiseDist::Gaussian => 1.0 + 1e-9,
            _ => 0.05,
        };
        root_decreasing(|s| mgf(s) - E, lo, 50.0)
    }
}

/// Root of a decreasing function on `[lo, hi]` by bisection.
fn root_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    if !(f(lo) > 0.0 && f(hi) < 0.0) {
        return Err(Error::invalid("root is not bracketed"));
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * mid {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `P(εz ≤ x) = E_ε[Φ(x/|ε|)]` for `z ~ N(0,1)` independent of `ε`.
pub fn product_normal_cdf(x: f64, noise: &NoiseDist) -> Result<f64> {
    noise.require_sub_gaussian()?;
    if x.is_nan() {
        return Err(Error::invalid("cdf argument is NaN"));
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    if x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if x == 0.0 {
        return Ok(0.5);
    }
    // symmetric law: work with |x| and reflect
    let upper = noise.expect(|e| normal_cdf(x.abs() / e) - 0.5, x.abs())?;
    let p = if x > 0.0 { 0.5 + upper } else { 0.5 - upper };
    Ok(p.clamp(0.0, 1.0))
}

/// `q` with `P(εz ≤ q) = level`, by bracketing and bisection.
pub fn product_normal_quantile(level: f64, noise: &NoiseDist) -> Result<f64> {
    noise.require_sub_gaussian()?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("quantile level {level} is outside (0, 1)")));
    }
    if level == 0.5 {
        return Ok(0.0);
    }
    let target = level.max(1.0 - level);
    let mut hi = 1.0;
    while product_normal_cdf(hi, noise)? < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::invalid(format!("quantile level {level} is too extreme")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
        if product_normal_cdf(mid, noise)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    Ok(if level > 0.5 { q } else { -q })
}

/// `E[εz·1(εz > q_{1-α})]`, with `q_{1-α}` the `(1-α)`-quantile of `εz`.
///
/// Uses `E[z·1(z > c)] = φ(c)`, so the moment is `E_ε[|ε|·φ(q/|ε|)]`.
/// `alpha = 1` is the full expectation, zero.
pub fn truncated_product_moment(alpha: f64, noise: &NoiseDist) -> Result<f64> {
    noise.require_sub_gaussian()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    let q = product_normal_quantile(1.0 - alpha, noise)?;
    tail_moment_at(q, noise)
}

/// `E[εz·1(εz > q)]` for a given threshold.
pub fn tail_moment_at(q: f64, noise: &NoiseDist) -> Result<f64> {
    noise.expect(|e| e * normal_pdf(q / e), q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_helpers() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // statrs erfc is good to about 1e-11 here
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-10);
        assert!(normal_cdf(-37.0) > 0.0);
    }

    #[test]
    fn cdf_symmetry_and_limits() {
        for noise in [NoiseDist::Gaussian, NoiseDist::Rademacher, NoiseDist::Uniform] {
            assert_eq!(product_normal_cdf(0.0, &noise).unwrap(), 0.5);
            let a = product_normal_cdf(0.7, &noise).unwrap();
            let b = product_normal_cdf(-0.7, &noise).unwrap();
            assert!((a + b - 1.0).abs() < 1e-14);
            assert!(product_normal_cdf(60.0, &noise).unwrap() > 1.0 - 1e-8);
        }
    }

    #[test]
    fn rademacher_reduces_to_normal() {
        let r = NoiseDist::Rademacher;
        assert!((product_normal_cdf(1.3, &r).unwrap() - normal_cdf(1.3)).abs() < 1e-14);
        assert!((tail_moment_at(0.4, &r).unwrap() - normal_pdf(0.4)).abs() < 1e-14);
    }

    #[test]
    fn half_tail_is_half_abs_mean() {
        let m = truncated_product_moment(0.5, &NoiseDist::Gaussian).unwrap();
        assert!((m - 1.0 / PI).abs() < 1e-9);
        let u = NoiseDist::Uniform;
        let mu = truncated_product_moment(0.5, &u).unwrap();
        assert!((mu - u.abs_mean().unwrap() * FRAC_2_PI.sqrt() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for noise in [NoiseDist::Gaussian, NoiseDist::Uniform] {
            for x in [-2.5, -0.3, 0.01, 1.3, 4.0] {
                let level = product_normal_cdf(x, &noise).unwrap();
                let q = product_normal_quantile(level, &noise).unwrap();
                assert!((q - x).abs() < 1e-6, "{noise:?} {x} {q}");
            }
        }
    }

    #[test]
    fn student_t_is_rejected() {
        let t = NoiseDist::StudentT { df: 3.0 };
        assert!(matches!(product_normal_cdf(1.0, &t), Err(Error::UnsupportedDistribution(_))));
        assert!(t.psi2_norm().is_err());
        assert!((t.second_moment() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn psi2_norms() {
        let g = NoiseDist::Gaussian.psi2_norm().unwrap();
        assert!((g * g - 2.0 / (1.0 - (-2.0f64).exp())).abs() < 1e-12);
        assert_eq!(NoiseDist::Rademacher.psi2_norm().unwrap(), 1.0);
        // Uniform on [-√3, √3] is bounded by √3, so its norm is below √3 / √1
        let u = NoiseDist::Uniform.psi2_norm().unwrap();
        assert!(u > 1.0 && u < SQRT_3);
        let check = NoiseDist::Uniform.expect(|e| (e * e / (u * u)).exp(), 0.0).unwrap();
        assert!((check - E).abs() < 1e-9);
    }

    #[test]
    fn product_psi1_gaussian_matches_quadrature() {
        let s = NoiseDist::Gaussian.product_psi1_norm().unwrap();
        // oracle: integrate the Gaussian mixture directly, exponent combined
        let direct = 2.0
            * integrate(
                |e| {
                    2.0 * (e * e / (2.0 * s * s) - e * e / 2.0).exp() / (2.0 * PI).sqrt()
                        * normal_cdf(e / s)
                },
                0.0,
                80.0,
            );
        assert!((direct - E).abs() < 1e-8, "{s} {direct}");
        let r = NoiseDist::Rademacher.product_psi1_norm().unwrap();
        assert!((2.0 * (0.5 / (r * r)).exp() * normal_cdf(1.0 / r) - E).abs() < 1e-10);
    }
}
