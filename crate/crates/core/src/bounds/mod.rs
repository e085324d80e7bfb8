//! Closed-form bounds on `Δ_k(v)` and the product-normal utilities behind them.
//!
//! Noise laws are standardized; for noise `σ_ε·ε` every lower-bound value
//! scales linearly in `σ_ε`. Absolute constants the theory leaves open
//! (`C`, `c`) are explicit parameters and echoed in each report.

mod product;
mod quadrature;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use product::{
    normal_cdf, normal_pdf, product_normal_cdf, product_normal_quantile, tail_moment_at,
    truncated_product_moment, NoiseDist,
};
pub use quadrature::{integrate, QUADRATURE_TOLERANCE};

/// Default cutoff on `k/n` and `p/n` separating "small" from "proportional".
pub const REGIME_CUTOFF: f64 = 0.1;

/// Model 2: `y = βᵀx + σ_ε·ε`, `x ~ (0, Σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub sigma: Matrix<f64>,
    pub beta: Vec<f64>,
    pub noise: NoiseDist,
    pub noise_scale: f64,
}

impl ModelSpec {
    /// `Σ = I_p`, `β = 0`, standard Gaussian noise.
    pub fn isotropic(p: usize) -> Self {
        Self {
            sigma: Matrix::identity(p),
            beta: vec![0.0; p],
            noise: NoiseDist::Gaussian,
            noise_scale: 1.0,
        }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if p == 0 {
            return Err(Error::invalid("model needs p >= 1"));
        }
        if self.sigma.nrows() != p || self.sigma.ncols() != p {
            return Err(Error::DimensionMismatch {
                what: "sigma",
                expected: p,
                found: self.sigma.nrows(),
            });
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid("noise_scale must be finite and >= 0"));
        }
        self.noise.validate()?;
        crate::linalg::factor_spd(&self.sigma)?;
        Ok(())
    }
}

/// Inputs to the bound formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    /// `k/n`.
    pub alpha: f64,
    /// `(p-1)/(n-k)`.
    pub gamma: f64,
    pub t: f64,
    pub delta: f64,
    /// `‖Σ^{-1/2}‖`.
    pub sigma_inv_norm: f64,
    /// `‖Σ^{-1/2}v‖`.
    pub sigma_inv_v_norm: f64,
    /// `σ_ε`.
    pub noise_scale: f64,
    /// `η = (1 + ω³)‖Σ^{-1/2}‖‖y‖_{ψ₂}` for the misspecified rate.
    pub eta_misspec: f64,
    /// `η̃` for the consistency rate.
    pub eta_consistency: f64,
    /// `ω = ‖Σ^{-1/2}x‖_{ψ₂}`; defaults to the Gaussian value.
    pub omega: f64,
    pub kappa: f64,
    pub beta_norm: f64,
    /// Absolute constant `C` multiplying the rate bounds.
    pub big_c: f64,
    /// Absolute constant `c` in the conditions and probability terms.
    pub small_c: f64,
}

impl BoundParams {
    /// Unit norms, `t = 1`, `δ = 0.1`, `C = c = 1`.
    pub fn new(n: usize, p: usize, k: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::invalid("bounds need n >= 1 and p >= 1"));
        }
        if k >= n {
            return Err(Error::invalid(format!("k = {k} must be below n = {n}")));
        }
        Ok(Self {
            n,
            p,
            k,
            alpha: k as f64 / n as f64,
            gamma: (p as f64 - 1.0) / (n - k) as f64,
            t: 1.0,
            delta: 0.1,
            sigma_inv_norm: 1.0,
            sigma_inv_v_norm: 1.0,
            noise_scale: 1.0,
            eta_misspec: 1.0,
            eta_consistency: 1.0,
            omega: NoiseDist::Gaussian.psi2_norm().expect("gaussian"),
            kappa: 1.0,
            beta_norm: 0.0,
            big_c: 1.0,
            small_c: 1.0,
        })
    }

    pub fn with_t_delta(mut self, t: f64, delta: f64) -> Self {
        self.t = t;
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t", self.t),
            ("delta", self.delta),
            ("sigma_inv_norm", self.sigma_inv_norm),
            ("sigma_inv_v_norm", self.sigma_inv_v_norm),
            ("eta_misspec", self.eta_misspec),
            ("eta_consistency", self.eta_consistency),
            ("omega", self.omega),
            ("kappa", self.kappa),
            ("C", self.big_c),
            ("c", self.small_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_scale >= 0.0 && self.beta_norm >= 0.0) {
            return Err(Error::invalid("noise_scale and beta_norm must be >= 0"));
        }
        if self.k >= self.n {
            return Err(Error::invalid("k must be below n"));
        }
        Ok(())
    }

    fn log_enk(&self) -> f64 {
        (std::f64::consts::E * self.n as f64 / self.k as f64).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    AsymptoticLb,
    FiniteSampleLb,
    GaussianUb,
    MisspecRateUb,
    ConsistencyRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticTag {
    Asymptotic,
}

/// Either a probability in `[0, 1]` or the label `"asymptotic"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Guarantee {
    Probability(f64),
    Label(AsymptoticTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    I,
    II,
    III,
    IV,
}

impl Region {
    pub fn robust(self) -> bool {
        matches!(self, Region::I | Region::II)
    }

    pub fn consistent(self) -> bool {
        matches!(self, Region::I | Region::III)
    }
}

/// Places `(k, p, n)` in the robustness/consistency table by comparing
/// `k/n` and `p/n` to `cutoff`.
pub fn classify_regime(n: usize, k: usize, p: usize, cutoff: f64) -> Region {
    let k_large = k as f64 / n as f64 >= cutoff;
    let p_large = p as f64 / n as f64 >= cutoff;
    match (k_large, p_large) {
        (false, false) => Region::I,
        (false, true) => Region::II,
        (true, false) => Region::III,
        (true, true) => Region::IV,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub value: f64,
    pub probability_guarantee: Guarantee,
    /// Guarantee before clamping to `[0, 1]`, when it is a probability.
    pub probability_unclamped: Option<f64>,
    /// Set when the clamped guarantee is zero.
    pub vacuous: bool,
    /// Absent for the asymptotic bound, which depends on `alpha` only.
    pub params: Option<BoundParams>,
    pub noise: Option<NoiseDist>,
    pub constants_assumed: BTreeMap<String, f64>,
    /// Intermediate quantities and alternative variants of the value.
    pub details: BTreeMap<String, f64>,
    pub regime: Option<Region>,
}

impl BoundReport {
    fn new(kind: BoundKind, value: f64, params: Option<BoundParams>) -> Self {
        Self {
            kind,
            value,
            probability_guarantee: Guarantee::Label(AsymptoticTag::Asymptotic),
            probability_unclamped: None,
            vacuous: false,
            params,
            noise: None,
            constants_assumed: BTreeMap::new(),
            details: BTreeMap::new(),
            regime: None,
        }
    }

    fn with_probability(mut self, raw: f64) -> Self {
        let p = raw.clamp(0.0, 1.0);
        self.probability_guarantee = Guarantee::Probability(p);
        self.probability_unclamped = Some(raw);
        self.vacuous = p == 0.0;
        self
    }

    fn detail(mut self, name: &str, v: f64) -> Self {
        self.details.insert(name.to_string(), v);
        self
    }

    fn constant(mut self, name: &str, v: f64) -> Self {
        self.constants_assumed.insert(name.to_string(), v);
        self
    }
}

/// `‖Σ^{-1/2}v‖·E[εz·1(εz > q_{1-α})]/(1-α)`.
///
/// For noise `σ_ε·ε` pass `σ_ε·‖Σ^{-1/2}v‖` as `sigma_inv_v_norm`.
pub fn asymptotic_lower_bound(alpha: f64, sigma_inv_v_norm: f64, noise: &NoiseDist) -> Result<BoundReport> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if !(sigma_inv_v_norm >= 0.0 && sigma_inv_v_norm.is_finite()) {
        return Err(Error::invalid("sigma_inv_v_norm must be finite and >= 0"));
    }
    let moment = truncated_product_moment(alpha, noise)?;
    let value = sigma_inv_v_norm * moment / (1.0 - alpha);
    let mut report = BoundReport::new(BoundKind::AsymptoticLb, value, None)
        .detail("alpha", alpha)
        .detail("sigma_inv_v_norm", sigma_inv_v_norm)
        .detail("truncated_moment", moment);
    report.noise = Some(*noise);
    Ok(report)
}

fn check_lower_bound_params(params: &BoundParams) -> Result<()> {
    params.validate()?;
    if !(params.alpha > 0.0 && params.alpha < 0.5) {
        return Err(Error::AlphaOutOfRange(params.alpha));
    }
    if !(params.gamma < 1.0) {
        return Err(Error::invalid(format!("gamma = {} must be below 1", params.gamma)));
    }
    Ok(())
}

/// Non-asymptotic lower bound on `Δ_k(v)` for Model 2 with
/// `Q_{α,t} = (1-t)E[εz·1(εz > q_{1-α+t})] - t‖εz‖_{ψ₁}` and
/// `η = √(2E ε² + ‖ε‖²_{ψ₂})`:
///
/// `‖Σ^{-1/2}v‖·[(1-γ)/(1-γ-t)·(Q/(1-α+3t) - 3ηδ) - ηt/(1-√(γ(1-α))-t)²]`
///
/// holding with probability `1 - 13e^{-cnt²} - 2^{-c(n-k-p)δ²} - 3e^{-n(1/2-α)²}`.
/// `details["value_without_gamma_factor"]` replaces `(1-γ)/(1-γ-t)` by `1/(1-t)`.
pub fn finite_sample_lower_bound(params: &BoundParams, noise: &NoiseDist) -> Result<BoundReport> {
    check_lower_bound_params(params)?;
    let BoundParams {
        n,
        p,
        k,
        alpha,
        gamma,
        t,
        delta,
        ..
    } = *params;
    if t >= alpha {
        return Err(Error::invalid(format!("t = {t} must be below alpha = {alpha}")));
    }
    if !(1.0 - gamma - t > 0.0 && 1.0 - (gamma * (1.0 - alpha)).sqrt() - t > 0.0) {
        return Err(Error::invalid("t too large for gamma"));
    }
    let scale = params.noise_scale;
    let tail = truncated_product_moment(alpha - t, noise)? * scale;
    let psi1 = noise.product_psi1_norm()? * scale;
    let psi2 = noise.psi2_norm()?;
    let eta = (2.0 * noise.second_moment() + psi2 * psi2).sqrt() * scale;
    let q = (1.0 - t) * tail - t * psi1;
    let inner = q / (1.0 - alpha + 3.0 * t) - 3.0 * eta * delta;
    let leading = (1.0 - gamma) / (1.0 - gamma - t) * inner;
    if !(leading > 0.0) {
        return Err(Error::LeadingTermNonpositive(leading));
    }
    let slack = eta * t / (1.0 - (gamma * (1.0 - alpha)).sqrt() - t).powi(2);
    let value = params.sigma_inv_v_norm * (leading - slack);
    let without = params.sigma_inv_v_norm * (inner / (1.0 - t) - slack);

    let c = params.small_c;
    let (nf, kf, pf) = (n as f64, k as f64, p as f64);
    let raw = 1.0
        - 13.0 * (-c * nf * t * t).exp()
        - 2f64.powf(-c * (nf - kf - pf) * delta * delta)
        - 3.0 * (-nf * (0.5 - alpha).powi(2)).exp();
    let mut report = BoundReport::new(BoundKind::FiniteSampleLb, value, Some(*params))
        .with_probability(raw)
        .constant("c", c)
        .detail("q_alpha_t", q)
        .detail("tail_moment", tail)
        .detail("product_psi1_norm", psi1)
        .detail("eta", eta)
        .detail("leading_term", params.sigma_inv_v_norm * leading)
        .detail("value_without_gamma_factor", without);
    report.noise = Some(*noise);
    Ok(report)
}

/// `ρ = √(3k/n·log(en/k)) + √(p/n) + δ`.
pub fn rho(params: &BoundParams) -> f64 {
    let (n, k, p) = (params.n as f64, params.k as f64, params.p as f64);
    let lead = if params.k == 0 { 0.0 } else { (3.0 * k / n * params.log_enk()).sqrt() };
    lead + (p / n).sqrt() + params.delta
}

/// Explicit upper bound on `max_S ‖β̂ - β̂_S‖` for Gaussian noise:
///
/// `‖Σ^{-1/2}‖σ_ε/(1-ρ)⁴·[(6k/n·L + (2/n)√(kpL))(1+t)² + 72√k(k+p)/n^{3/2}·L^{3/2}(1+t)³]`
///
/// with `L = log(en/k)`, holding with probability
/// `1 - 6(en/k)^{-kt²} - e^{-n/2} - 2e^{-nδ²/2}`. Zero at `k = 0`.
pub fn gaussian_upper_bound(params: &BoundParams) -> Result<BoundReport> {
    params.validate()?;
    let (n, k, p) = (params.n as f64, params.k as f64, params.p as f64);
    if 2 * params.k > params.n {
        return Err(Error::invalid("the Gaussian upper bound needs k <= n/2"));
    }
    if params.p + params.k > params.n {
        return Err(Error::invalid("the Gaussian upper bound needs p <= n - k"));
    }
    let r = rho(params);
    if r >= 1.0 {
        return Err(Error::RhoTooLarge(r));
    }
    if params.k == 0 {
        return Ok(BoundReport::new(BoundKind::GaussianUb, 0.0, Some(*params))
            .with_probability(1.0)
            .detail("rho", r));
    }
    let t = params.t;
    let l = params.log_enk();
    let first = (6.0 * k / n * l + 2.0 / n * (k * p * l).sqrt()) * (1.0 + t).powi(2);
    let second = 72.0 * k.sqrt() * (k + p) / n.powf(1.5) * l.powf(1.5) * (1.0 + t).powi(3);
    let value = params.sigma_inv_norm * params.noise_scale / (1.0 - r).powi(4) * (first + second);
    let raw = 1.0
        - 6.0 * (-k * t * t * l).exp()
        - (-n / 2.0).exp()
        - 2.0 * (-n * params.delta * params.delta / 2.0).exp();
    Ok(BoundReport::new(BoundKind::GaussianUb, value, Some(*params))
        .with_probability(raw)
        .detail("rho", r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    MisspecDelta,
    Consistency,
}

/// Rate bounds for the misspecified model, with the absolute constants
/// taken from `params.big_c` / `params.small_c`:
///
/// - `MisspecDelta`: `Cη(k/n·L + (1/n)√(kpL))(1+t)²`, needs
///   `ω²(√(k/n·L) + √(p/n)) ≤ c` and `k ≤ n/2`; probability
///   `1 - 3(en/k)^{-kt²} - 4e^{-cn/ω⁴}`.
/// - `Consistency`: `Cη̃(√(p/n)(1+t) + (p/n)(1+t)²)`, needs `ω²√(p/n) ≤ c`;
///   probability `1 - 3e^{-pt²} - 3e^{-cn/ω⁴}`.
///
/// The report carries the regime of `(k, p, n)` at [`REGIME_CUTOFF`].
pub fn rate_bounds(params: &BoundParams, kind: RateKind) -> Result<BoundReport> {
    rate_bounds_with_cutoff(params, kind, REGIME_CUTOFF)
}

pub fn rate_bounds_with_cutoff(params: &BoundParams, kind: RateKind, cutoff: f64) -> Result<BoundReport> {
    params.validate()?;
    let (n, k, p) = (params.n as f64, params.k as f64, params.p as f64);
    let (big_c, c, t) = (params.big_c, params.small_c, params.t);
    let w2 = params.omega * params.omega;
    let tail = 4.0 * (-c * n / (w2 * w2)).exp();
    let report = match kind {
        RateKind::MisspecDelta => {
            if 2 * params.k > params.n {
                return Err(Error::invalid("the misspecified rate needs k <= n/2"));
            }
            let l = if params.k == 0 { 0.0 } else { params.log_enk() };
            let lhs = w2 * ((k / n * l).sqrt() + (p / n).sqrt());
            if lhs > c {
                return Err(Error::ConditionViolated { lhs, limit: c });
            }
            let value = big_c * params.eta_misspec * (k / n * l + (k * p * l).sqrt() / n) * (1.0 + t).powi(2);
            let raw = if params.k == 0 {
                1.0 - tail
            } else {
                1.0 - 3.0 * (-k * t * t * l).exp() - tail
            };
            BoundReport::new(BoundKind::MisspecRateUb, value, Some(*params))
                .with_probability(raw)
                .detail("condition_lhs", lhs)
        }
        RateKind::Consistency => {
            let lhs = w2 * (p / n).sqrt();
            if lhs > c {
                return Err(Error::ConditionViolated { lhs, limit: c });
            }
            let r = p / n;
            let value = big_c * params.eta_consistency * (r.sqrt() * (1.0 + t) + r * (1.0 + t).powi(2));
            let raw = 1.0 - 3.0 * (-p * t * t).exp() - 3.0 * (-c * n / (w2 * w2)).exp();
            BoundReport::new(BoundKind::ConsistencyRate, value, Some(*params))
                .with_probability(raw)
                .detail("condition_lhs", lhs)
        }
    };
    let mut report = report.constant("C", big_c).constant("c", c).constant("regime_cutoff", cutoff);
    report.regime = Some(classify_regime(params.n, params.k, params.p, cutoff));
    Ok(report)
}
