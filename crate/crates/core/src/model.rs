//! Cure-rate survival model with Weibull promotion times.
//!
//! Population survival for a subject with covariates `x`:
//!
//! ```text
//! S_P(y) = (1 + γ ϑ c^{γϑ} F(y)^λ)^{-1/γ},   c = e^{1/e},  ϑ = exp(β₀ + β·x)
//! p₀     = (1 + γ ϑ c^{γϑ})^{-1/γ}
//! ```
//!
//! With `s = γϑ/e` the cure-rate base is `1 + s·e^{1+s}`, which is bounded
//! below by zero and touches it only at `s = -1` (the zero-cure point).
//! Everything here is evaluated in log space through that form, so the
//! only way to get a non-finite value is a non-finite input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln c` for the model constant `c = e^{1/e}`.
pub const LN_CURE_CONSTANT: f64 = 1.0 / std::f64::consts::E;

/// `c = e^{1/e}`.
pub const CURE_CONSTANT: f64 = 1.444_667_861_009_766_2;

/// Inside `|1+s| < STABLE_BASE_RADIUS` the cure-rate base is summed as a series.
const STABLE_BASE_RADIUS: f64 = 0.1;

/// A parameter point `(γ, λ, α₁, α₂, β₀..β_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub lambda: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: Vec<f64>,
}

impl ModelParams {
    pub fn new(gamma: f64, lambda: f64, alpha1: f64, alpha2: f64, beta: Vec<f64>) -> Self {
        Self {
            gamma,
            lambda,
            alpha1,
            alpha2,
            beta,
        }
    }

    /// Number of covariates `k` (excluding the intercept).
    pub fn n_covariates(&self) -> usize {
        self.beta.len().saturating_sub(1)
    }

    /// Length of the flattened vector, `k + 5`.
    pub fn dim(&self) -> usize {
        4 + self.beta.len()
    }

    /// Flatten as `(γ, λ, α₁, α₂, β₀, …, β_k)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&[self.gamma, self.lambda, self.alpha1, self.alpha2]);
        v.extend_from_slice(&self.beta);
        v
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::Dimension {
                expected: 5,
                got: values.len(),
            });
        }
        Ok(Self::new(
            values[0],
            values[1],
            values[2],
            values[3],
            values[4..].to_vec(),
        ))
    }

    /// Positivity constraints on λ, α₁, α₂ and finiteness of every entry.
    pub fn is_valid(&self) -> bool {
        self.lambda > 0.0
            && self.alpha1 > 0.0
            && self.alpha2 > 0.0
            && self.gamma.is_finite()
            && self.lambda.is_finite()
            && self.alpha1.is_finite()
            && self.alpha2.is_finite()
            && self.beta.iter().all(|b| b.is_finite())
    }

    /// Names in flattened order, `beta0..betak` for the coefficients.
    pub fn names(k: usize) -> Vec<String> {
        let mut names: Vec<String> = ["gamma", "lambda", "alpha1", "alpha2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        names.extend((0..=k).map(|j| format!("beta{j}")));
        names
    }
}

/// Observed right-censored data. The intercept column is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    ln_y: Vec<f64>,
    delta: Vec<bool>,
    /// Row-major `n × k`.
    x: Vec<f64>,
    k: usize,
}

impl Dataset {
    pub fn new(y: Vec<f64>, delta: Vec<bool>, x_rows: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        if delta.len() != y.len() {
            return Err(Error::Dimension {
                expected: y.len(),
                got: delta.len(),
            });
        }
        if x_rows.len() != y.len() {
            return Err(Error::Dimension {
                expected: y.len(),
                got: x_rows.len(),
            });
        }
        let mut x = Vec::with_capacity(y.len() * k);
        for (i, row) in x_rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(Error::Dimension {
                    expected: k,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite covariate in row {i}")));
            }
            x.extend(row);
        }
        if let Some(i) = y.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "observed time must be positive and finite (row {i}: {})",
                y[i]
            )));
        }
        let ln_y = y.iter().map(|v| v.ln()).collect();
        Ok(Self {
            y,
            ln_y,
            delta,
            x,
            k,
        })
    }

    /// A dataset with no observations; the posterior then equals the prior.
    pub fn empty(k: usize) -> Self {
        Self {
            y: Vec::new(),
            ln_y: Vec::new(),
            delta: Vec::new(),
            x: Vec::new(),
            k,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.k
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub(crate) fn ln_y(&self) -> &[f64] {
        &self.ln_y
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    /// Indices with `δ = 0` (Δ₀).
    pub fn censored(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.delta[i]).collect()
    }

    /// Indices with `δ = 1` (Δ₁).
    pub fn events(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.delta[i]).collect()
    }
}

/// Cure indicators: `true` = susceptible (`I = 1`), `false` = cured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentState {
    pub ind: Vec<bool>,
}

impl LatentState {
    /// Everybody susceptible; always consistent with the data.
    pub fn all_susceptible(n: usize) -> Self {
        Self { ind: vec![true; n] }
    }

    pub fn is_consistent_with(&self, data: &Dataset) -> bool {
        self.ind.len() == data.len() && data.delta().iter().zip(&self.ind).all(|(&d, &i)| !d || i)
    }

    pub fn n_cured(&self) -> usize {
        self.ind.iter().filter(|&&i| !i).count()
    }
}

/// Weibull promotion-time quantities at one observed time.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WeibullTerms {
    /// `ln F(y)`
    pub ln_cdf: f64,
    /// `ln f(y)`
    pub ln_pdf: f64,
}

impl WeibullTerms {
    pub fn new(y: f64, alpha1: f64, alpha2: f64) -> Self {
        let (_, ln_cdf, ln_pdf) = weibull_logs((alpha1 * y).ln(), alpha2, alpha1.ln(), alpha2.ln());
        Self { ln_cdf, ln_pdf }
    }
}

/// `(w, ln F, ln f)` with `w = (α₁y)^{α₂}`, from `ln(α₁y)` and the parameter logs.
pub(crate) fn weibull_logs(
    ln_scaled_y: f64,
    alpha2: f64,
    ln_alpha1: f64,
    ln_alpha2: f64,
) -> (f64, f64, f64) {
    let w = (alpha2 * ln_scaled_y).exp();
    let ln_cdf = if w > std::f64::consts::LN_2 {
        (-(-w).exp()).ln_1p()
    } else {
        (-(-w).exp_m1()).ln()
    };
    let ln_pdf = ln_alpha2 + ln_alpha1 + (alpha2 - 1.0) * ln_scaled_y - w;
    (w, ln_cdf, ln_pdf)
}

fn check_weibull_args(y: f64, alpha1: f64, alpha2: f64) -> Result<()> {
    if !(y > 0.0 && alpha1 > 0.0 && alpha2 > 0.0) {
        return Err(Error::Domain(format!(
            "weibull needs positive arguments (y={y}, alpha1={alpha1}, alpha2={alpha2})"
        )));
    }
    Ok(())
}

/// `F(y) = 1 - exp{-(α₁y)^{α₂}}`.
pub fn weibull_cdf(y: f64, alpha1: f64, alpha2: f64) -> Result<f64> {
    check_weibull_args(y, alpha1, alpha2)?;
    let w = (alpha1 * y).powf(alpha2);
    Ok(-(-w).exp_m1())
}

/// `f(y) = α₂α₁(α₁y)^{α₂-1} exp{-(α₁y)^{α₂}}`.
pub fn weibull_pdf(y: f64, alpha1: f64, alpha2: f64) -> Result<f64> {
    check_weibull_args(y, alpha1, alpha2)?;
    Ok(WeibullTerms::new(y, alpha1, alpha2).ln_pdf.exp())
}

/// Linear predictor `β₀ + Σ β_j x_j`.
pub fn linear_predictor(beta: &[f64], x_row: &[f64]) -> Result<f64> {
    if beta.len() != x_row.len() + 1 {
        return Err(Error::Dimension {
            expected: x_row.len() + 1,
            got: beta.len(),
        });
    }
    Ok(beta[0] + beta[1..].iter().zip(x_row).map(|(b, x)| b * x).sum::<f64>())
}

/// `ϑ(x) = exp{β₀ + β₁x₁ + … + β_k x_k}`.
pub fn link_theta(beta: &[f64], x_row: &[f64]) -> Result<f64> {
    let eta = linear_predictor(beta, x_row)?;
    let theta = eta.exp();
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::Infeasible(format!("linear predictor {eta} out of range")));
    }
    Ok(theta)
}

/// `1 + s·e^{1+s}` without cancellation near its zero at `s = -1`.
pub(crate) fn cure_base(s: f64) -> f64 {
    let t = 1.0 + s;
    if t.abs() < STABLE_BASE_RADIUS {
        // Σ_{m≥2} (m-1) t^m / m!
        let mut term = t;
        let mut sum = 0.0;
        for m in 2..=18 {
            term *= t / m as f64;
            sum += (m - 1) as f64 * term;
        }
        sum
    } else {
        1.0 + s * t.exp()
    }
}

/// `ln(1e-3)`: below this `ln|γv|` the scaled logarithm `ln(1+γv)/γ` is
/// evaluated by series, which also covers the promotion-time limit `γ → 0`.
const LN_SERIES_CUTOFF: f64 = -6.907_755_278_982_137;

/// `ln(1 + γv)` and `A = ln(1+γv)/γ` for `v = e^{ln_v}`. The pieces needed
/// only for gradients (`v/(1+γv)` and `∂A/∂γ`) are computed on request.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ScaledLog {
    pub ln_v: f64,
    pub ln_base: f64,
    pub a: f64,
    series: bool,
}

impl ScaledLog {
    /// `ln_abs_gamma` is `ln|γ|`, hoisted out because it is shared by every
    /// subject. `exact_ln_base` is only called when `γv < -1/2`, where
    /// `ln(1 + γv)` loses accuracy and the caller has a cancellation-free form
    /// of the base.
    pub(crate) fn new(
        gamma: f64,
        ln_abs_gamma: f64,
        ln_v: f64,
        exact_ln_base: impl FnOnce() -> f64,
    ) -> Self {
        let x = ln_abs_gamma + ln_v;
        if !(x >= LN_SERIES_CUTOFF) {
            let v = ln_v.exp();
            let gv = gamma * v;
            let a = v * (1.0 - gv * (0.5 - gv * (1.0 / 3.0 - gv * (0.25 - gv * 0.2))));
            return Self {
                ln_v,
                ln_base: gamma * a,
                a,
                series: true,
            };
        }
        let ln_base = if gamma > 0.0 {
            if x > 35.0 {
                x + (-x).exp()
            } else {
                x.exp().ln_1p()
            }
        } else {
            let gv = -x.exp();
            if gv >= -0.5 {
                gv.ln_1p()
            } else {
                exact_ln_base()
            }
        };
        Self {
            ln_v,
            ln_base,
            a: ln_base / gamma,
            series: false,
        }
    }

    /// `v / (1 + γv)`.
    pub(crate) fn ratio(&self, gamma: f64) -> f64 {
        if self.series {
            let v = self.ln_v.exp();
            v / (1.0 + gamma * v)
        } else if gamma > 0.0 {
            1.0 / ((-self.ln_v).exp() + gamma)
        } else {
            (self.ln_v - self.ln_base).exp()
        }
    }

    /// `∂A/∂γ` at fixed `v`, given `ratio()`.
    pub(crate) fn a_gamma(&self, gamma: f64, ratio: f64) -> f64 {
        if self.series {
            let v = self.ln_v.exp();
            let gv = gamma * v;
            v * v * (-0.5 + gv * (2.0 / 3.0 - gv * (0.75 - gv * (0.8 - gv * 5.0 / 6.0))))
        } else {
            (gamma * ratio - self.ln_base) / (gamma * gamma)
        }
    }
}

/// `ln|γ|`, `-inf` at zero.
pub(crate) fn ln_abs(gamma: f64) -> f64 {
    gamma.abs().ln()
}

/// The promotion-time mixture for one covariate vector: `(γ, λ, ϑ)` with ϑ
/// carried in log space.
#[derive(Debug, Clone, Copy)]
pub struct CureSurvival {
    pub(crate) gamma: f64,
    pub(crate) lambda: f64,
    pub(crate) eta: f64,
    /// `s = γϑ/e`
    pub(crate) s: f64,
    /// `ln(ϑ c^{γϑ}) = η + s`
    pub(crate) ln_u: f64,
    ln_abs_gamma: f64,
    pub(crate) cure: ScaledLog,
}

impl CureSurvival {
    /// `eta` is the linear predictor `ln ϑ`.
    pub fn new(gamma: f64, lambda: f64, eta: f64) -> Result<Self> {
        if !(gamma.is_finite() && eta.is_finite()) {
            return Err(Error::Infeasible(format!("gamma={gamma}, eta={eta}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        let s = gamma * (eta - 1.0).exp();
        let ln_u = eta + s;
        if !(s.is_finite() && ln_u.is_finite()) {
            return Err(Error::Infeasible(format!("gamma*theta overflows (eta={eta})")));
        }
        let ln_abs_gamma = ln_abs(gamma);
        let cure = ScaledLog::new(gamma, ln_abs_gamma, ln_u, || cure_base(s).ln());
        Ok(Self {
            gamma,
            lambda,
            eta,
            s,
            ln_u,
            ln_abs_gamma,
            cure,
        })
    }

    pub fn for_subject(params: &ModelParams, x_row: &[f64]) -> Result<Self> {
        Self::new(params.gamma, params.lambda, linear_predictor(&params.beta, x_row)?)
    }

    pub fn theta(&self) -> f64 {
        self.eta.exp()
    }

    /// `ln p₀`; `-inf` exactly at the zero-cure point.
    pub fn log_cure_prob(&self) -> f64 {
        -self.cure.a
    }

    pub(crate) fn survival_terms(&self, ln_cdf: f64) -> ScaledLog {
        let lq = self.lambda * ln_cdf;
        ScaledLog::new(self.gamma, self.ln_abs_gamma, self.ln_u + lq, || {
            (-lq.exp_m1() + cure_base(self.s) * lq.exp()).ln()
        })
    }

    /// `ln S_P` given `ln F(y)`.
    pub fn log_survival(&self, ln_cdf: f64) -> f64 {
        -self.survival_terms(ln_cdf).a
    }

    /// `ln f_P` given the Weibull log-cdf and log-pdf at `y`.
    pub fn log_density(&self, ln_cdf: f64, ln_pdf: f64) -> f64 {
        let sv = self.survival_terms(ln_cdf);
        -sv.a - sv.ln_base
            + self.ln_u
            + self.lambda.ln()
            + (self.lambda - 1.0) * ln_cdf
            + ln_pdf
    }
}

/// `S_P(y | x, θ)`.
pub fn pop_survival(y: f64, x_row: &[f64], params: &ModelParams) -> Result<f64> {
    check_weibull_args(y, params.alpha1, params.alpha2)?;
    let cs = CureSurvival::for_subject(params, x_row)?;
    let wt = WeibullTerms::new(y, params.alpha1, params.alpha2);
    finite(cs.log_survival(wt.ln_cdf).exp(), "survival")
}

/// `p₀(x; θ)`, the limit of `S_P` as `y → ∞`.
pub fn cure_prob(x_row: &[f64], params: &ModelParams) -> Result<f64> {
    let cs = CureSurvival::for_subject(params, x_row)?;
    finite(cs.log_cure_prob().exp(), "cure probability")
}

/// `f_P(y | x, θ) = -∂S_P/∂y`.
pub fn pop_density(y: f64, x_row: &[f64], params: &ModelParams) -> Result<f64> {
    check_weibull_args(y, params.alpha1, params.alpha2)?;
    let cs = CureSurvival::for_subject(params, x_row)?;
    let wt = WeibullTerms::new(y, params.alpha1, params.alpha2);
    finite(cs.log_density(wt.ln_cdf, wt.ln_pdf).exp(), "density")
}

/// Proper survival and density of the susceptible sub-population,
/// `S_U = (S_P - p₀)/(1 - p₀)` and `f_U = f_P/(1 - p₀)`.
pub fn susceptible_parts(y: f64, x_row: &[f64], params: &ModelParams) -> Result<(f64, f64)> {
    check_weibull_args(y, params.alpha1, params.alpha2)?;
    let cs = CureSurvival::for_subject(params, x_row)?;
    let wt = WeibullTerms::new(y, params.alpha1, params.alpha2);
    let log_p0 = cs.log_cure_prob();
    let one_minus_p0 = -log_p0.exp_m1();
    if !(one_minus_p0 > 0.0) {
        return Err(Error::Degenerate(log_p0.exp()));
    }
    let log_sp = cs.log_survival(wt.ln_cdf);
    // S_P - p₀ = S_P (1 - p₀/S_P)
    let gap = log_sp.exp() * -(log_p0 - log_sp).exp_m1();
    let s_u = (gap / one_minus_p0).clamp(0.0, 1.0);
    let f_u = cs.log_density(wt.ln_cdf, wt.ln_pdf).exp() / one_minus_p0;
    Ok((finite(s_u, "susceptible survival")?, finite(f_u, "susceptible density")?))
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Infeasible(format!("{what} evaluated to {v}")))
    }
}
