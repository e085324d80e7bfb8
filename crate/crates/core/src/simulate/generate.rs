use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::{ModelSpec, NoiseDist};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{factor_spd, Matrix, SpdFactor};
use crate::scalar::{dot, euclid_norm};

/// Derives an independent 64-bit seed for `(replicate, stream)` from the
/// master seed. ChaCha's stream id carries the pair, so the result does not
/// depend on how many other seeds were derived or in what order.
pub fn split_seed(master: u64, replicate: u64, stream: u16) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((replicate << 16) | stream as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateFamily {
    Gaussian { sigma: Matrix<f64> },
    /// Independent ±1 entries.
    Rademacher,
    /// Uniform on the sphere of radius `√p`, so each coordinate has unit variance.
    UniformSphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseMap {
    /// `y = βᵀx + σ_ε·ε`.
    LinearPlusNoise,
    /// `y = (βᵀx)²/√p + σ_ε·ε`.
    QuadraticLink,
    /// `y = sign(βᵀx) + σ_ε·ε`.
    SignLink,
}

/// Model 1: sub-Gaussian covariates with a possibly non-linear response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Misspec {
    pub covariate_family: CovariateFamily,
    pub response_map: ResponseMap,
    pub beta: Vec<f64>,
    pub noise: NoiseDist,
    pub noise_scale: f64,
}

impl Misspec {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.beta.len() != p {
            return Err(Error::DimensionMismatch {
                what: "beta",
                expected: p,
                found: self.beta.len(),
            });
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid("noise_scale must be finite and >= 0"));
        }
        self.noise.validate()?;
        if let CovariateFamily::Gaussian { sigma } = &self.covariate_family {
            ModelSpec {
                sigma: sigma.clone(),
                beta: self.beta.clone(),
                noise: self.noise,
                noise_scale: self.noise_scale,
            }
            .validate()?;
        }
        Ok(())
    }
}

/// A generated Model 2 dataset plus the quantities only a simulation knows:
/// the realized noise and the whitened design `Z` with `x = Lz`, `Σ = LLᵀ`.
#[derive(Debug, Clone)]
pub struct Model2Sample {
    pub data: Dataset<f64>,
    /// Realized noise `σ_ε·εᵢ`.
    pub noise: Vec<f64>,
    pub whitened: Matrix<f64>,
    factor: SpdFactor<f64>,
}

impl Model2Sample {
    /// `‖Σ^{-1/2}v‖ = ‖L⁻¹v‖`.
    pub fn sigma_inv_v_norm(&self, v: &[f64]) -> Result<f64> {
        Ok(euclid_norm(&self.factor.forward(v)?))
    }

    /// `Zu` with `u = L⁻¹v/‖L⁻¹v‖`: the standard-normal coordinate of each
    /// row that drives `vᵀβ̂`.
    pub fn whitened_column(&self, v: &[f64]) -> Result<Vec<f64>> {
        let w = self.factor.forward(v)?;
        let norm = euclid_norm(&w);
        if norm == 0.0 {
            return Err(Error::invalid("direction must be nonzero"));
        }
        let u: Vec<f64> = w.iter().map(|x| x / norm).collect();
        self.whitened.mul_vec(&u)
    }
}

fn draw_covariates(family: &CovariateFamily, p: usize, rng: &mut ChaCha8Rng, z: &mut [f64]) {
    match family {
        CovariateFamily::Gaussian { .. } => {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
        }
        CovariateFamily::Rademacher => {
            for v in z.iter_mut() {
                *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
        }
        CovariateFamily::UniformSphere => {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let norm = euclid_norm(z);
            let scale = (p as f64).sqrt() / norm;
            for v in z.iter_mut() {
                *v *= scale;
            }
        }
    }
}

fn generate(m: &Misspec, n: usize, p: usize, seed: u64) -> Result<Model2Sample> {
    m.validate(p)?;
    if n < p {
        return Err(Error::invalid(format!("n = {n} must be at least p = {p}")));
    }
    let sigma = match &m.covariate_family {
        CovariateFamily::Gaussian { sigma } => sigma.clone(),
        _ => Matrix::identity(p),
    };
    let factor = factor_spd(&sigma)?;
    let lower = factor.lower();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut whitened = Matrix::zeros(n, p);
    let mut design = Matrix::zeros(n, p);
    let mut noise = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    let root_p = (p as f64).sqrt();
    for i in 0..n {
        draw_covariates(&m.covariate_family, p, &mut rng, whitened.row_mut(i));
        let e = m.noise_scale * m.noise.sample(&mut rng);
        let z = whitened.row(i);
        let x = design.row_mut(i);
        for (a, xa) in x.iter_mut().enumerate() {
            *xa = dot(&lower.row(a)[..=a], &z[..=a]);
        }
        let signal = dot(x, &m.beta);
        let y = match m.response_map {
            ResponseMap::LinearPlusNoise => signal,
            ResponseMap::QuadraticLink => signal * signal / root_p,
            ResponseMap::SignLink => {
                if signal > 0.0 {
                    1.0
                } else if signal < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        } + e;
        noise.push(e);
        response.push(y);
    }
    Ok(Model2Sample {
        data: Dataset::new(design, response)?,
        noise,
        whitened,
        factor,
    })
}

/// Draws `n` rows from Model 2. Same seed, same bits.
pub fn gen_model2(spec: &ModelSpec, n: usize, seed: u64) -> Result<Model2Sample> {
    spec.validate()?;
    let m = Misspec {
        covariate_family: CovariateFamily::Gaussian {
            sigma: spec.sigma.clone(),
        },
        response_map: ResponseMap::LinearPlusNoise,
        beta: spec.beta.clone(),
        noise: spec.noise,
        noise_scale: spec.noise_scale,
    };
    generate(&m, n, spec.p(), seed)
}

/// Draws `n` rows from Model 1.
pub fn gen_model1(m: &Misspec, n: usize, p: usize, seed: u64) -> Result<Dataset<f64>> {
    Ok(generate(m, n, p, seed)?.data)
}

pub(crate) fn sample_model1(m: &Misspec, n: usize, p: usize, seed: u64) -> Result<Model2Sample> {
    generate(m, n, p, seed)
}
