//! Independent priors on `(γ, λ, α₁, α₂, β)`.
//!
//! γ has the signed-gamma density `b^a/(2Γ(a)) |γ|^{a-1} e^{-b|γ|}` (a Laplace
//! law when `a = b = 1`), λ, α₁ and α₂ are inverse-gamma and β is
//! multivariate normal.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// |γ| below this is outside the prior support.
pub const GAMMA_SUPPORT_EPS: f64 = 1e-12;

/// Hyperparameters as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorHyperparams {
    pub a_gamma: f64,
    pub b_gamma: f64,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub mu: Vec<f64>,
    /// Row-major covariance of β.
    pub sigma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorPreset {
    Vague,
    Regularized,
}

impl PriorPreset {
    /// Hyperparameters for a model with `k` covariates.
    pub fn hyperparams(self, k: usize) -> PriorHyperparams {
        let (ag, bg, a, b, var) = match self {
            PriorPreset::Vague => (0.2, 0.1, 2.001, 1.0, 100.0),
            PriorPreset::Regularized => (1.0, 1.0, 2.1, 1.1, 10.0),
        };
        let dim = k + 1;
        PriorHyperparams {
            a_gamma: ag,
            b_gamma: bg,
            a_lambda: a,
            b_lambda: b,
            a1: a,
            b1: b,
            a2: a,
            b2: b,
            mu: vec![0.0; dim],
            sigma: (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { var } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PriorPreset::Vague => "vague",
            PriorPreset::Regularized => "regularized",
        }
    }
}

impl std::str::FromStr for PriorPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vague" => Ok(PriorPreset::Vague),
            "regularized" => Ok(PriorPreset::Regularized),
            other => Err(Error::Config(format!("unknown prior preset `{other}`"))),
        }
    }
}

/// Validated prior with the normal block factorised once.
#[derive(Debug, Clone)]
pub struct Prior {
    hp: PriorHyperparams,
    mu: DVector<f64>,
    precision: DMatrix<f64>,
    /// Every term that does not depend on the parameters.
    log_norm: f64,
}

fn signed_gamma_norm(a: f64, b: f64) -> f64 {
    a * b.ln() - std::f64::consts::LN_2 - ln_gamma(a)
}

fn inv_gamma_norm(a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a)
}

impl Prior {
    pub fn new(hp: PriorHyperparams) -> Result<Self> {
        let scalars = [
            hp.a_gamma,
            hp.b_gamma,
            hp.a_lambda,
            hp.b_lambda,
            hp.a1,
            hp.b1,
            hp.a2,
            hp.b2,
        ];
        if scalars.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Hyperparameters(
                "scalar hyperparameters must be positive and finite".into(),
            ));
        }
        let dim = hp.mu.len();
        if dim == 0 {
            return Err(Error::Hyperparameters("mu must contain the intercept".into()));
        }
        if hp.sigma.len() != dim || hp.sigma.iter().any(|row| row.len() != dim) {
            return Err(Error::Hyperparameters(format!("sigma must be {dim}x{dim}")));
        }
        let sigma = DMatrix::from_fn(dim, dim, |i, j| hp.sigma[i][j]);
        if (&sigma - sigma.transpose()).abs().max() > 1e-12 * sigma.abs().max().max(1.0) {
            return Err(Error::Hyperparameters("sigma is not symmetric".into()));
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Hyperparameters("sigma is not positive definite".into()))?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let precision = chol.inverse();
        let log_norm = signed_gamma_norm(hp.a_gamma, hp.b_gamma)
            + inv_gamma_norm(hp.a_lambda, hp.b_lambda)
            + inv_gamma_norm(hp.a1, hp.b1)
            + inv_gamma_norm(hp.a2, hp.b2)
            - 0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            mu: DVector::from_column_slice(&hp.mu),
            hp,
            precision,
            log_norm,
        })
    }

    pub fn preset(preset: PriorPreset, k: usize) -> Self {
        Self::new(preset.hyperparams(k)).expect("preset hyperparameters are valid")
    }

    pub fn hyperparams(&self) -> &PriorHyperparams {
        &self.hp
    }

    /// Number of β coefficients, `k + 1`.
    pub fn beta_dim(&self) -> usize {
        self.mu.len()
    }

    pub fn in_support(&self, params: &ModelParams) -> bool {
        params.gamma.abs() >= GAMMA_SUPPORT_EPS
            && params.is_valid()
            && params.beta.len() == self.beta_dim()
    }

    /// Signed-gamma log density of γ (unnormalised).
    fn gamma_kernel(&self, gamma: f64) -> f64 {
        let g = gamma.abs();
        (self.hp.a_gamma - 1.0) * g.ln() - self.hp.b_gamma * g
    }

    fn inv_gamma_kernel(a: f64, b: f64, v: f64) -> f64 {
        -(a + 1.0) * v.ln() - b / v
    }

    fn normal_kernel(&self, beta: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(beta) - &self.mu;
        -0.5 * diff.dot(&(&self.precision * &diff))
    }

    /// Log prior density; `-inf` outside the support.
    pub fn log_density(&self, params: &ModelParams) -> f64 {
        if !self.in_support(params) {
            return f64::NEG_INFINITY;
        }
        self.log_norm
            + self.gamma_kernel(params.gamma)
            + Self::inv_gamma_kernel(self.hp.a_lambda, self.hp.b_lambda, params.lambda)
            + Self::inv_gamma_kernel(self.hp.a1, self.hp.b1, params.alpha1)
            + Self::inv_gamma_kernel(self.hp.a2, self.hp.b2, params.alpha2)
            + self.normal_kernel(&params.beta)
    }

    /// `h · log π(θ)`: every factor, the γ term included, raised to the power `h`.
    pub fn log_density_heated(&self, params: &ModelParams, h: f64) -> f64 {
        let lp = self.log_density(params);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            h * lp
        }
    }

    /// Adds `∇ h·log π(θ)` to `out`, ordered `(γ, λ, α₁, α₂, β…)`.
    pub fn add_grad_heated(&self, params: &ModelParams, h: f64, out: &mut [f64]) {
        let hp = &self.hp;
        let g = params.gamma;
        out[0] += h * ((hp.a_gamma - 1.0) / g - hp.b_gamma * g.signum());
        let ig = |a: f64, b: f64, v: f64| h * (-(a + 1.0) / v + b / (v * v));
        out[1] += ig(hp.a_lambda, hp.b_lambda, params.lambda);
        out[2] += ig(hp.a1, hp.b1, params.alpha1);
        out[3] += ig(hp.a2, hp.b2, params.alpha2);
        let diff = DVector::from_column_slice(&params.beta) - &self.mu;
        let score = &self.precision * diff;
        for (o, s) in out[4..].iter_mut().zip(score.iter()) {
            *o -= h * s;
        }
    }

    /// Gradient of the heated log prior as a fresh vector.
    pub fn grad_heated(&self, params: &ModelParams, h: f64) -> Vec<f64> {
        let mut out = vec![0.0; params.dim()];
        self.add_grad_heated(params, h, &mut out);
        out
    }
}

/// Random starting point: γ, β_j ~ N(0, 4) and λ, α₁, α₂ ~ Exp(1).
pub fn sample_initial<R: Rng + ?Sized>(rng: &mut R, k: usize) -> ModelParams {
    let normal = Normal::new(0.0, 2.0).expect("valid normal");
    let gamma = loop {
        let g: f64 = normal.sample(rng);
        if g.abs() >= 1e-6 {
            break g;
        }
    };
    let lambda: f64 = Exp1.sample(rng);
    let alpha1: f64 = Exp1.sample(rng);
    let alpha2: f64 = Exp1.sample(rng);
    let beta = (0..=k).map(|_| normal.sample(rng)).collect();
    ModelParams::new(gamma, lambda, alpha1, alpha2, beta)
}
