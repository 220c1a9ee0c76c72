//! Complete-data log-likelihood, log posterior and their gradients.
//!
//! Per subject the complete likelihood contributes `ln f_P` for an observed
//! event, `ln p₀` for a censored cured subject and `ln(S_P - p₀)` for a
//! censored susceptible one. Gradients are taken with respect to
//! `(γ, λ, α₁, α₂, η)` per subject and mapped to β through the covariates.
//!
//! The samplers keep one [`SubjectEval`] per subject and, for block
//! updates, recompute only the pieces that depend on the moved parameters.

use crate::error::{Error, Result};
use crate::model::{cure_base, ln_abs, weibull_logs, Dataset, LatentState, ModelParams, ScaledLog};
use crate::prior::Prior;

/// Which factor of the complete likelihood a subject contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Contribution {
    Event,
    Cured,
    CensoredSusceptible,
}

impl Contribution {
    pub fn of(delta: bool, susceptible: bool) -> Self {
        match (delta, susceptible) {
            (true, _) => Contribution::Event,
            (false, false) => Contribution::Cured,
            (false, true) => Contribution::CensoredSusceptible,
        }
    }
}

/// Gradient of one subject's contribution in `(γ, λ, α₁, α₂, η)`.
pub(crate) type SubjectGrad = [f64; 5];

/// Parameters that changed since a cached evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    All,
    Gamma,
    Lambda,
    Alphas,
    Beta,
}

/// Parameter-level constants shared by every subject.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointConsts {
    gamma: f64,
    lambda: f64,
    alpha1: f64,
    alpha2: f64,
    ln_abs_gamma: f64,
    ln_lambda: f64,
    ln_alpha1: f64,
    ln_alpha2: f64,
}

impl PointConsts {
    pub fn new(p: &ModelParams) -> Self {
        Self {
            gamma: p.gamma,
            lambda: p.lambda,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            ln_abs_gamma: ln_abs(p.gamma),
            ln_lambda: p.lambda.ln(),
            ln_alpha1: p.alpha1.ln(),
            ln_alpha2: p.alpha2.ln(),
        }
    }
}

/// `∂A` for `A = ln(1 + γv)/γ`, given `∂ ln v`; also returns `v/(1+γv)`.
fn scaled_log_grad(sl: &ScaledLog, gamma: f64, dln_v: [f64; 5]) -> (SubjectGrad, f64) {
    let ratio = sl.ratio(gamma);
    let mut g = dln_v.map(|d| ratio * d);
    g[0] += sl.a_gamma(gamma, ratio);
    (g, ratio)
}

fn neg(g: SubjectGrad) -> SubjectGrad {
    g.map(|v| -v)
}

/// `ln(e^d - 1)` for `d ≥ 0`.
fn ln_expm1(d: f64) -> f64 {
    if d > 1.0 {
        d + (-(-d).exp()).ln_1p()
    } else {
        d.exp_m1().ln()
    }
}

/// Cached pieces of one subject's contribution, filled in dependency order:
/// η (β), Weibull terms (α), cure terms (γ, η), then survival terms (all).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SubjectEval {
    eta: f64,
    /// `ln(α₁y)`
    ln_scaled_y: f64,
    /// `(α₁y)^{α₂}`
    w: f64,
    ln_cdf: f64,
    ln_pdf: f64,
    /// `ϑ/e`
    theta_e: f64,
    /// `s = γϑ/e`
    s: f64,
    /// `ln u = η + s`
    ln_u: f64,
    cure: ScaledLog,
    surv: ScaledLog,
    /// `ln f_P` for an event, `ln(S_P - p₀)` for a censored subject.
    main: f64,
}

impl SubjectEval {
    fn set_eta(&mut self, beta: &[f64], row: &[f64]) {
        self.eta = beta[0] + beta[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>();
    }

    fn set_weibull(&mut self, pc: &PointConsts, ln_y: f64) {
        self.ln_scaled_y = pc.ln_alpha1 + ln_y;
        (self.w, self.ln_cdf, self.ln_pdf) =
            weibull_logs(self.ln_scaled_y, pc.alpha2, pc.ln_alpha1, pc.ln_alpha2);
    }

    fn set_cure(&mut self, pc: &PointConsts) {
        self.theta_e = (self.eta - 1.0).exp();
        self.s = pc.gamma * self.theta_e;
        self.ln_u = self.eta + self.s;
        let s = self.s;
        self.cure = ScaledLog::new(pc.gamma, pc.ln_abs_gamma, self.ln_u, || cure_base(s).ln());
        if !(s.is_finite() && self.ln_u.is_finite()) {
            // γϑ overflows
            self.cure.a = f64::NAN;
        }
    }

    fn set_survival(&mut self, pc: &PointConsts, event: bool) {
        let lq = pc.lambda * self.ln_cdf;
        let s = self.s;
        self.surv = ScaledLog::new(pc.gamma, pc.ln_abs_gamma, self.ln_u + lq, || {
            (-lq.exp_m1() + cure_base(s) * lq.exp()).ln()
        });
        self.main = if event {
            -self.surv.a - self.surv.ln_base
                + self.ln_u
                + pc.ln_lambda
                + (pc.lambda - 1.0) * self.ln_cdf
                + self.ln_pdf
        } else {
            self.log_gap(pc)
        };
        if self.cure.a.is_nan() {
            self.main = f64::NAN;
        }
    }

    #[cfg(test)]
    fn full(pc: &PointConsts, eta: f64, ln_y: f64, event: bool) -> Self {
        let mut e = Self {
            eta,
            ..Self::default()
        };
        e.set_weibull(pc, ln_y);
        e.set_cure(pc);
        e.set_survival(pc, event);
        e
    }

    fn log_p0(&self) -> f64 {
        -self.cure.a
    }

    pub fn log_survival(&self) -> f64 {
        -self.surv.a
    }

    /// Contribution to the complete log-likelihood.
    pub fn value(&self, kind: Contribution) -> f64 {
        match kind {
            Contribution::Cured => self.log_p0(),
            _ => self.main,
        }
    }

    /// `ln(S_P - p₀) - ln p₀` for a censored subject; `+inf` without cured mass.
    pub fn log_odds(&self) -> f64 {
        if self.cure.a == f64::INFINITY {
            return f64::INFINITY;
        }
        self.main - self.log_p0()
    }

    fn dln_u(&self) -> [f64; 5] {
        [self.theta_e, 0.0, 0.0, 0.0, 1.0 + self.s]
    }

    /// `(∂ ln F/∂α₁, ∂ ln F/∂α₂)`.
    fn dln_cdf(&self, pc: &PointConsts) -> (f64, f64) {
        // w / (e^w - 1), the factor e^{-w}·w / F
        let w_ratio = if self.w == 0.0 {
            1.0
        } else {
            self.w / self.w.exp_m1()
        };
        (pc.alpha2 * w_ratio / pc.alpha1, w_ratio * self.ln_scaled_y)
    }

    /// `∂ ln v_S` where `v_S = u F^λ`.
    fn dln_vs(&self, pc: &PointConsts, df: (f64, f64)) -> [f64; 5] {
        [
            self.theta_e,
            self.ln_cdf,
            pc.lambda * df.0,
            pc.lambda * df.1,
            1.0 + self.s,
        ]
    }

    fn d_log_p0(&self, pc: &PointConsts) -> SubjectGrad {
        neg(scaled_log_grad(&self.cure, pc.gamma, self.dln_u()).0)
    }

    /// `D = ln S_P - ln p₀` as `ln(1 + γv')/γ` with `v' = u(1 - F^λ)/B_S`,
    /// which avoids the cancellation when the two are close.
    fn gap_exponent(&self, pc: &PointConsts) -> ScaledLog {
        let lq = pc.lambda * self.ln_cdf;
        let ln_v = self.ln_u + (-lq.exp_m1()).ln() - self.surv.ln_base;
        let (cure_ln_base, surv_ln_base) = (self.cure.ln_base, self.surv.ln_base);
        ScaledLog::new(pc.gamma, pc.ln_abs_gamma, ln_v, || cure_ln_base - surv_ln_base)
    }

    /// `ln(S_P - p₀)`.
    fn log_gap(&self, pc: &PointConsts) -> f64 {
        let log_p0 = self.log_p0();
        let log_s = self.log_survival();
        let diff = log_s - log_p0;
        if diff > 1.0 {
            // p₀/S_P < 1/e: factor out S_P
            log_s + (-(-diff).exp()).ln_1p()
        } else {
            log_p0 + ln_expm1(self.gap_exponent(pc).a)
        }
    }

    fn grad(&self, pc: &PointConsts, kind: Contribution) -> SubjectGrad {
        if kind == Contribution::Cured {
            return self.d_log_p0(pc);
        }
        let gamma = pc.gamma;
        let df = self.dln_cdf(pc);
        let dvs = self.dln_vs(pc, df);
        let (ds, ratio_s) = scaled_log_grad(&self.surv, gamma, dvs);
        let ds = neg(ds);
        if kind == Contribution::Event {
            let mut g = ds;
            // - ∂ ln B_S with B_S = 1 + γ v_S
            g[0] -= ratio_s * (1.0 + self.s);
            for j in 1..5 {
                g[j] -= gamma * ratio_s * dvs[j];
            }
            // + ∂[ln u + ln λ + (λ-1) ln F + ln f]
            let l1 = pc.lambda - 1.0;
            g[0] += self.theta_e;
            g[1] += 1.0 / pc.lambda + self.ln_cdf;
            g[2] += l1 * df.0 + pc.alpha2 * (1.0 - self.w) / pc.alpha1;
            g[3] += l1 * df.1 + 1.0 / pc.alpha2 + self.ln_scaled_y * (1.0 - self.w);
            g[4] += 1.0 + self.s;
            return g;
        }
        let diff = self.log_survival() - self.log_p0();
        let mut g = [0.0; 5];
        if diff > 1.0 {
            let r = (-diff).exp();
            if r > 0.0 {
                let dp = self.d_log_p0(pc);
                for j in 0..5 {
                    g[j] = (ds[j] - r * dp[j]) / (1.0 - r);
                }
            } else {
                g = ds;
            }
            return g;
        }
        // ∂ ln p₀ + ∂ ln(e^D - 1)
        let lq = pc.lambda * self.ln_cdf;
        let q = lq.exp();
        let one_minus_q = -lq.exp_m1();
        let tail = q / one_minus_q + gamma * ratio_s;
        let dln_v = [
            self.theta_e - ratio_s * (1.0 + self.s),
            -self.ln_cdf * tail,
            -pc.lambda * df.0 * tail,
            -pc.lambda * df.1 * tail,
            (1.0 + self.s) * (-self.surv.ln_base).exp(),
        ];
        let d_sl = self.gap_exponent(pc);
        let factor = 1.0 / -(-d_sl.a).exp_m1();
        let dd = scaled_log_grad(&d_sl, gamma, dln_v).0;
        let dp = self.d_log_p0(pc);
        for j in 0..5 {
            g[j] = dp[j] + dd[j] * factor;
        }
        g
    }
}

/// Fills `out` with the per-subject evaluation at `params`. With `base`,
/// only the pieces that depend on `block` are recomputed; `base` must be the
/// evaluation at a point that differs from `params` only in that block.
pub(crate) fn evaluate_into(
    params: &ModelParams,
    data: &Dataset,
    base: Option<&[SubjectEval]>,
    block: Block,
    out: &mut Vec<SubjectEval>,
) {
    let pc = PointConsts::new(params);
    let n = data.len();
    let (block, base) = match base {
        Some(b) if b.len() == n => (block, b),
        _ => (Block::All, &[][..]),
    };
    out.resize(n, SubjectEval::default());
    let (ln_y, delta) = (data.ln_y(), data.delta());
    for (i, e) in out.iter_mut().enumerate() {
        if block != Block::All {
            *e = base[i];
        }
        match block {
            Block::All => {
                e.set_eta(&params.beta, data.row(i));
                e.set_weibull(&pc, ln_y[i]);
                e.set_cure(&pc);
            }
            Block::Beta => {
                e.set_eta(&params.beta, data.row(i));
                e.set_cure(&pc);
            }
            Block::Gamma => e.set_cure(&pc),
            Block::Alphas => e.set_weibull(&pc, ln_y[i]),
            Block::Lambda => {}
        }
        e.set_survival(&pc, delta[i]);
    }
}

/// `ln L_c` from a cached evaluation; `-inf` if any contribution is not finite.
pub(crate) fn total_loglik(evals: &[SubjectEval], data: &Dataset, latent: &LatentState) -> f64 {
    let delta = data.delta();
    let mut total = 0.0;
    for (i, e) in evals.iter().enumerate() {
        total += e.value(Contribution::of(delta[i], latent.ind[i]));
    }
    if total.is_finite() {
        total
    } else {
        f64::NEG_INFINITY
    }
}

/// Writes `∇ ln L_c` (unheated) to `out`, ordered like [`ModelParams::to_vec`].
pub(crate) fn loglik_grad(
    params: &ModelParams,
    evals: &[SubjectEval],
    data: &Dataset,
    latent: &LatentState,
    out: &mut [f64],
) {
    let pc = PointConsts::new(params);
    out.iter_mut().for_each(|v| *v = 0.0);
    let delta = data.delta();
    for (i, e) in evals.iter().enumerate() {
        let sg = e.grad(&pc, Contribution::of(delta[i], latent.ind[i]));
        out[..5].iter_mut().zip(&sg).for_each(|(gj, s)| *gj += s);
        for (gj, x) in out[5..].iter_mut().zip(data.row(i)) {
            *gj += sg[4] * x;
        }
    }
}

/// Log contribution of one subject, with its gradient in `(γ, λ, α₁, α₂, η)`
/// written to `grad` when given.
#[cfg(test)]
pub(crate) fn subject_loglik(
    params: &ModelParams,
    y: f64,
    eta: f64,
    kind: Contribution,
    grad: Option<&mut SubjectGrad>,
) -> f64 {
    let pc = PointConsts::new(params);
    let e = SubjectEval::full(&pc, eta, y.ln(), kind == Contribution::Event);
    if let Some(g) = grad {
        *g = e.grad(&pc, kind);
    }
    let v = e.value(kind);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn check_dims(params: &ModelParams, data: &Dataset) -> Result<()> {
    if params.beta.len() != data.n_covariates() + 1 {
        return Err(Error::Dimension {
            expected: data.n_covariates() + 1,
            got: params.beta.len(),
        });
    }
    Ok(())
}

fn check_latent(latent: &LatentState, data: &Dataset) -> Result<()> {
    if latent.ind.len() != data.len() {
        return Err(Error::Dimension {
            expected: data.len(),
            got: latent.ind.len(),
        });
    }
    if !latent.is_consistent_with(data) {
        return Err(Error::Domain("observed event marked as cured".into()));
    }
    Ok(())
}

#[cfg(test)]
fn eta_of(params: &ModelParams, data: &Dataset, i: usize) -> f64 {
    let mut e = SubjectEval::default();
    e.set_eta(&params.beta, data.row(i));
    e.eta
}

/// Complete log-likelihood and optionally its gradient (unheated). Returns
/// `-inf` at infeasible points; the gradient is then unspecified.
pub(crate) fn complete_loglik_with_grad(
    params: &ModelParams,
    data: &Dataset,
    latent: &LatentState,
    grad: Option<&mut [f64]>,
) -> f64 {
    if !params.is_valid() {
        return f64::NEG_INFINITY;
    }
    let mut evals = Vec::new();
    evaluate_into(params, data, None, Block::All, &mut evals);
    let total = total_loglik(&evals, data, latent);
    if let Some(g) = grad {
        loglik_grad(params, &evals, data, latent, g);
    }
    total
}

/// `ln L_c(θ; y, δ, I)`; `-inf` at infeasible points.
pub fn complete_loglik(params: &ModelParams, data: &Dataset, latent: &LatentState) -> Result<f64> {
    check_dims(params, data)?;
    check_latent(latent, data)?;
    Ok(complete_loglik_with_grad(params, data, latent, None))
}

/// Observed-data log-likelihood `Σ δ ln f_P + (1-δ) ln S_P`, with the latent
/// indicators integrated out.
pub fn observed_loglik(params: &ModelParams, data: &Dataset) -> Result<f64> {
    check_dims(params, data)?;
    if !params.is_valid() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut evals = Vec::new();
    evaluate_into(params, data, None, Block::All, &mut evals);
    Ok(observed_from(&evals, data))
}

/// Observed-data log-likelihood from a cached evaluation.
pub(crate) fn observed_from(evals: &[SubjectEval], data: &Dataset) -> f64 {
    let delta = data.delta();
    let mut total = 0.0;
    for (i, e) in evals.iter().enumerate() {
        total += if delta[i] {
            e.main
        } else {
            e.log_survival()
        };
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// `h · ∇ ln L_c`, ordered `(γ, λ, α₁, α₂, β₀, …, β_k)`.
pub fn grad_complete_loglik(
    params: &ModelParams,
    data: &Dataset,
    latent: &LatentState,
    h: f64,
) -> Result<Vec<f64>> {
    check_dims(params, data)?;
    check_latent(latent, data)?;
    let mut g = vec![0.0; params.dim()];
    let v = complete_loglik_with_grad(params, data, latent, Some(&mut g));
    if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Infeasible("log-likelihood gradient is not finite".into()));
    }
    g.iter_mut().for_each(|x| *x *= h);
    Ok(g)
}

/// Unheated joint log posterior `ln L_c + ln π(θ)` (up to the evidence).
pub fn log_posterior(
    params: &ModelParams,
    data: &Dataset,
    latent: &LatentState,
    prior: &Prior,
) -> Result<f64> {
    check_dims(params, data)?;
    check_latent(latent, data)?;
    let lp = prior.log_density(params);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    Ok(lp + complete_loglik_with_grad(params, data, latent, None))
}

/// `∇ h·(ln L_c + ln π)`.
pub fn grad_log_posterior(
    params: &ModelParams,
    data: &Dataset,
    latent: &LatentState,
    prior: &Prior,
    h: f64,
) -> Result<Vec<f64>> {
    if !prior.in_support(params) {
        return Err(Error::Infeasible("parameters outside the prior support".into()));
    }
    let mut g = grad_complete_loglik(params, data, latent, h)?;
    prior.add_grad_heated(params, h, &mut g);
    Ok(g)
}

/// `ln(S_P - p₀) - ln p₀` for a censored subject: the log odds of being
/// susceptible at heat 1. `+inf` when the cure probability is zero.
#[cfg(test)]
pub(crate) fn censored_log_odds(params: &ModelParams, data: &Dataset, i: usize) -> f64 {
    let pc = PointConsts::new(params);
    let eta = eta_of(params, data, i);
    SubjectEval::full(&pc, eta, data.ln_y()[i], false).log_odds()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::PriorPreset;

    /// Naive complete log-likelihood of one subject from the closed forms.
    fn naive(params: &ModelParams, y: f64, x: &[f64], kind: Contribution) -> f64 {
        let c = (1.0f64 / std::f64::consts::E).exp();
        let theta = (params.beta[0]
            + params.beta[1..].iter().zip(x).map(|(b, x)| b * x).sum::<f64>())
        .exp();
        let g = params.gamma;
        let u = theta * c.powf(g * theta);
        let w = (params.alpha1 * y).powf(params.alpha2);
        let f = 1.0 - (-w).exp();
        let fpdf = params.alpha2 * params.alpha1 * (params.alpha1 * y).powf(params.alpha2 - 1.0)
            * (-w).exp();
        let fl = f.powf(params.lambda);
        let sp = (1.0 + g * u * fl).powf(-1.0 / g);
        let p0 = (1.0 + g * u).powf(-1.0 / g);
        match kind {
            Contribution::Event => {
                let dens = (1.0 + g * u * fl).powf(-1.0 / g - 1.0)
                    * u
                    * params.lambda
                    * f.powf(params.lambda - 1.0)
                    * fpdf;
                dens.ln()
            }
            Contribution::Cured => p0.ln(),
            Contribution::CensoredSusceptible => (sp - p0).ln(),
        }
    }

    fn kinds() -> [Contribution; 3] {
        [
            Contribution::Event,
            Contribution::Cured,
            Contribution::CensoredSusceptible,
        ]
    }

    #[test]
    fn subject_values_match_closed_forms() {
        let points = [
            ModelParams::new(1.0, 1.5, 0.8, 0.8, vec![1.5, 1.5, -0.8]),
            ModelParams::new(-0.5, 1.0, 0.8, 1.0, vec![2.0, -0.7, 1.0]),
            ModelParams::new(-0.05, 1.0, 0.8, 1.0, vec![2.0, -1.0, 1.0]),
            ModelParams::new(2.5, 0.6, 1.3, 2.0, vec![-0.4, 0.3, 0.2]),
        ];
        let x = [1.0, 0.3];
        for p in &points {
            for y in [0.05, 0.7, 2.0] {
                for kind in kinds() {
                    let eta = linear(p, &x);
                    let got = subject_loglik(p, y, eta, kind, None);
                    let want = naive(p, y, &x, kind);
                    assert!(
                        (got - want).abs() < 1e-9 * want.abs().max(1.0),
                        "{p:?} y={y} {kind:?}: {got} vs {want}"
                    );
                }
            }
        }
    }

    fn linear(p: &ModelParams, x: &[f64]) -> f64 {
        p.beta[0] + p.beta[1..].iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
    }

    fn fd_subject(p: &ModelParams, y: f64, eta: f64, kind: Contribution) -> SubjectGrad {
        let mut out = [0.0; 5];
        for (j, o) in out.iter_mut().enumerate() {
            let f = |delta: f64| {
                let mut v = [p.gamma, p.lambda, p.alpha1, p.alpha2, eta];
                v[j] += delta;
                let q = ModelParams::new(v[0], v[1], v[2], v[3], p.beta.clone());
                subject_loglik(&q, y, v[4], kind, None)
            };
            let base = [p.gamma, p.lambda, p.alpha1, p.alpha2, eta][j];
            let h = 1e-4 * base.abs().max(1.0);
            // Richardson-extrapolated central difference
            let d1 = (f(h) - f(-h)) / (2.0 * h);
            let d2 = (f(h / 2.0) - f(-h / 2.0)) / h;
            *o = (4.0 * d2 - d1) / 3.0;
        }
        out
    }

    #[test]
    fn subject_gradients_match_finite_differences() {
        let cases = [
            (ModelParams::new(1.0, 1.5, 0.8, 0.8, vec![0.0]), 2.6),
            (ModelParams::new(-0.5, 1.0, 0.8, 1.0, vec![0.0]), 1.3),
            (ModelParams::new(-1.0, 0.5, 0.5, 0.5, vec![0.0]), 0.9),
            (ModelParams::new(-1.0, 1.0, 0.5, 0.5, vec![0.0]), 0.99),
            (ModelParams::new(1e-7, 1.3, 1.1, 0.7, vec![0.0]), 0.2),
            (ModelParams::new(-2e-4, 1.3, 1.1, 0.7, vec![0.0]), -0.4),
            (ModelParams::new(3.0, 0.7, 1.1, 1.7, vec![0.0]), 1.8),
        ];
        for (p, eta) in &cases {
            for y in [0.03, 0.6, 3.0, 9.0] {
                for kind in kinds() {
                    let mut g = [0.0; 5];
                    let v = subject_loglik(p, y, *eta, kind, Some(&mut g));
                    if !v.is_finite() {
                        continue;
                    }
                    let fd = fd_subject(p, y, *eta, kind);
                    for j in 0..5 {
                        let tol = 1e-6 * fd[j].abs().max(1.0);
                        assert!(
                            (g[j] - fd[j]).abs() < tol,
                            "{p:?} eta={eta} y={y} {kind:?} coord {j}: {} vs {}",
                            g[j],
                            fd[j]
                        );
                    }
                }
            }
        }
    }

    fn toy_data() -> Dataset {
        Dataset::new(
            vec![0.4, 1.2, 2.5, 0.9, 3.3],
            vec![true, false, false, true, false],
            vec![
                vec![0.0, 0.2],
                vec![1.0, 0.7],
                vec![1.0, 0.1],
                vec![0.0, 0.9],
                vec![0.0, 0.5],
            ],
            2,
        )
        .unwrap()
    }

    #[test]
    fn zero_covariate_column_gives_zero_gradient() {
        let data = Dataset::new(
            vec![0.4, 1.2, 2.5],
            vec![true, false, false],
            vec![vec![0.3, 0.0], vec![0.8, 0.0], vec![0.1, 0.0]],
            2,
        )
        .unwrap();
        let latent = LatentState {
            ind: vec![true, true, false],
        };
        let p = ModelParams::new(0.7, 1.2, 0.9, 1.1, vec![0.1, 0.4, -0.3]);
        let g = grad_complete_loglik(&p, &data, &latent, 1.0).unwrap();
        assert_eq!(g[6], 0.0);
        let half = grad_complete_loglik(&p, &data, &latent, 0.5).unwrap();
        for (a, b) in g.iter().zip(&half) {
            assert!((0.5 * a - b).abs() < 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn observed_loglik_integrates_out_latent() {
        // ln S_P = ln(p₀ + (S_P - p₀)) for each censored subject
        let data = toy_data();
        let p = ModelParams::new(-0.4, 1.2, 0.9, 1.1, vec![0.1, 0.4, -0.3]);
        let obs = observed_loglik(&p, &data).unwrap();
        let mut total = 0.0;
        for i in 0..data.len() {
            let eta = eta_of(&p, &data, i);
            if data.delta()[i] {
                total += subject_loglik(&p, data.y()[i], eta, Contribution::Event, None);
            } else {
                let a = subject_loglik(&p, data.y()[i], eta, Contribution::Cured, None);
                let b =
                    subject_loglik(&p, data.y()[i], eta, Contribution::CensoredSusceptible, None);
                total += (a.exp() + b.exp()).ln();
            }
        }
        assert!((obs - total).abs() < 1e-12);
    }

    #[test]
    fn block_updates_match_full_evaluation() {
        let data = toy_data();
        let latent = LatentState {
            ind: vec![true, false, true, true, false],
        };
        let p = ModelParams::new(0.8, 1.4, 0.7, 1.2, vec![0.2, 0.3, -0.5]);
        let mut base = Vec::new();
        evaluate_into(&p, &data, None, Block::All, &mut base);
        let moves: [(Block, fn(&mut ModelParams)); 5] = [
            (Block::Gamma, |q| q.gamma = -0.3),
            (Block::Lambda, |q| q.lambda = 0.6),
            (Block::Alphas, |q| q.alpha1 = 1.9),
            (Block::Alphas, |q| q.alpha2 = 0.4),
            (Block::Beta, |q| q.beta = vec![-0.1, 0.8, 0.4]),
        ];
        for (block, f) in moves {
            let mut q = p.clone();
            f(&mut q);
            let (mut cached, mut fresh) = (Vec::new(), Vec::new());
            evaluate_into(&q, &data, Some(&base), block, &mut cached);
            evaluate_into(&q, &data, None, Block::All, &mut fresh);
            assert_eq!(
                total_loglik(&cached, &data, &latent),
                total_loglik(&fresh, &data, &latent),
                "{block:?}"
            );
            assert_eq!(observed_from(&cached, &data), observed_from(&fresh, &data));
        }
    }

    #[test]
    fn inconsistent_latent_is_rejected() {
        let data = toy_data();
        let p = ModelParams::new(0.5, 1.0, 1.0, 1.0, vec![0.0; 3]);
        let mut latent = LatentState::all_susceptible(5);
        latent.ind[0] = false;
        assert!(complete_loglik(&p, &data, &latent).is_err());
    }

    #[test]
    fn zero_cure_point_keeps_susceptibles_finite() {
        let data = toy_data();
        // β₀ = 1 with zero slopes gives ϑ = e, and with γ = -1 no cured mass
        let p = ModelParams::new(-1.0, 1.0, 1.0, 1.0, vec![1.0, 0.0, 0.0]);
        let latent = LatentState::all_susceptible(5);
        let v = complete_loglik(&p, &data, &latent).unwrap();
        assert!(v.is_finite());
        let g = grad_complete_loglik(&p, &data, &latent, 1.0).unwrap();
        assert!(g.iter().all(|x| x.is_finite()));
        let mut cured = latent.clone();
        cured.ind[1] = false;
        assert_eq!(complete_loglik(&p, &data, &cured).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn log_odds_matches_direct_difference() {
        let data = toy_data();
        let p = ModelParams::new(0.8, 1.4, 0.7, 1.2, vec![0.2, 0.3, -0.5]);
        for i in data.censored() {
            let eta = eta_of(&p, &data, i);
            let y = data.y()[i];
            let a = subject_loglik(&p, y, eta, Contribution::Cured, None);
            let b = subject_loglik(&p, y, eta, Contribution::CensoredSusceptible, None);
            assert!((censored_log_odds(&p, &data, i) - (b - a)).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_gradient_adds_prior_score() {
        let data = toy_data();
        let prior = Prior::preset(PriorPreset::Vague, 2);
        let latent = LatentState {
            ind: vec![true, true, false, true, true],
        };
        let p = ModelParams::new(0.8, 1.4, 0.7, 1.2, vec![0.2, 0.3, -0.5]);
        let full = grad_log_posterior(&p, &data, &latent, &prior, 0.36).unwrap();
        let lik = grad_complete_loglik(&p, &data, &latent, 0.36).unwrap();
        let pr = prior.grad_heated(&p, 0.36);
        for j in 0..full.len() {
            assert!((full[j] - lik[j] - pr[j]).abs() < 1e-12);
        }
    }
}
