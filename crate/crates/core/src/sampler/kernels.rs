//! Transition kernels of a single chain at heat `h`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ChainState, Move};
use crate::likelihood::{evaluate_into, loglik_grad, total_loglik, Block};
#[cfg(test)]
use crate::likelihood::censored_log_odds;
use crate::model::{Dataset, ModelParams};
use crate::prior::Prior;

/// Metropolis–Hastings accept/reject for a proposal whose prior and
/// likelihood are already evaluated. Consumes exactly one uniform.
fn accept(state: &mut ChainState, lp: f64, ll: f64, log_correction: f64) -> bool {
    let u: f64 = state.rng.random();
    if !(lp.is_finite() && ll.is_finite()) {
        return false;
    }
    let log_a = state.heat * (ll + lp - state.loglik - state.logprior) + log_correction;
    u.ln() < log_a
}

/// Evaluates the proposal into the chain's scratch buffer, reusing the
/// cached pieces that do not depend on `block`, and returns the unheated
/// `(log prior, log-likelihood)`.
fn evaluate_proposal(
    state: &mut ChainState,
    data: &Dataset,
    prior: &Prior,
    proposal: &ModelParams,
    block: Block,
) -> (f64, f64) {
    let lp = prior.log_density(proposal);
    if !lp.is_finite() || !proposal.is_valid() {
        return (f64::NEG_INFINITY, f64::NEG_INFINITY);
    }
    evaluate_into(proposal, data, Some(&state.evals), block, &mut state.scratch);
    (lp, total_loglik(&state.scratch, data, &state.latent))
}

fn commit(state: &mut ChainState, proposal: ModelParams, lp: f64, ll: f64) {
    state.params = proposal;
    state.loglik = ll;
    state.logprior = lp;
    std::mem::swap(&mut state.evals, &mut state.scratch);
}

fn propose_block(
    state: &mut ChainState,
    data: &Dataset,
    prior: &Prior,
    mv: Move,
    proposal: ModelParams,
    log_hastings: f64,
) {
    let block = match mv {
        Move::Gamma => Block::Gamma,
        Move::Lambda => Block::Lambda,
        Move::Alpha1 | Move::Alpha2 => Block::Alphas,
        Move::Beta => Block::Beta,
        Move::Mala => Block::All,
    };
    let (lp, ll) = evaluate_proposal(state, data, prior, &proposal, block);
    let ok = accept(state, lp, ll, log_hastings);
    if ok {
        commit(state, proposal, lp, ll);
    }
    state.stats.record(mv, ok);
}

fn std_normal(state: &mut ChainState) -> f64 {
    StandardNormal.sample(&mut state.rng)
}

/// Updates γ, λ, α₁, α₂ and β in turn. γ and β take symmetric normal steps;
/// the positive parameters take log-normal steps with Hastings factor `ṽ/v`.
pub fn mh_single_site_sweep(state: &mut ChainState, data: &Dataset, prior: &Prior) {
    let z = std_normal(state);
    let mut p = state.params.clone();
    p.gamma += state.scales.s2_gamma.sqrt() * z;
    propose_block(state, data, prior, Move::Gamma, p, 0.0);

    for mv in [Move::Lambda, Move::Alpha1, Move::Alpha2] {
        let s2 = match mv {
            Move::Lambda => state.scales.s2_lambda,
            Move::Alpha1 => state.scales.s2_alpha1,
            _ => state.scales.s2_alpha2,
        };
        let step = s2.sqrt() * std_normal(state);
        let mut p = state.params.clone();
        let v = match mv {
            Move::Lambda => &mut p.lambda,
            Move::Alpha1 => &mut p.alpha1,
            _ => &mut p.alpha2,
        };
        *v *= step.exp();
        // ln(ṽ/v)
        propose_block(state, data, prior, mv, p, step);
    }

    let mut p = state.params.clone();
    for j in 0..p.beta.len() {
        let z = std_normal(state);
        p.beta[j] += state.scales.nu[j].sqrt() * z;
    }
    propose_block(state, data, prior, Move::Beta, p, 0.0);
}

/// `∇ h(ln L_c + ln π)` at `params` from its cached evaluation.
fn heated_gradient(
    params: &ModelParams,
    evals: &[crate::likelihood::SubjectEval],
    state: &ChainState,
    data: &Dataset,
    prior: &Prior,
    out: &mut [f64],
) {
    loglik_grad(params, evals, data, &state.latent, out);
    for g in out.iter_mut() {
        *g *= state.heat;
    }
    prior.add_grad_heated(params, state.heat, out);
}

/// `ln q(to | from)` up to a constant for the Langevin proposal.
fn langevin_log_density(to: &[f64], from: &[f64], grad_from: &[f64], tau: f64) -> f64 {
    let sq: f64 = to
        .iter()
        .zip(from)
        .zip(grad_from)
        .map(|((t, f), g)| {
            let r = t - f - tau * g;
            r * r
        })
        .sum();
    -sq / (4.0 * tau)
}

/// Joint Langevin move `θ̃ = θ + τ∇ + √(2τ) ε` with the asymmetric
/// proposal correction. Falls back to a single-site sweep when the gradient
/// at the current point is not finite.
pub fn mala_step(state: &mut ChainState, data: &Dataset, prior: &Prior) {
    let dim = state.params.dim();
    let mut grad = vec![0.0; dim];
    heated_gradient(&state.params, &state.evals, state, data, prior, &mut grad);
    if grad.iter().any(|g| !g.is_finite()) {
        state.stats.mala_fallbacks += 1;
        mh_single_site_sweep(state, data, prior);
        return;
    }
    let tau = state.scales.tau;
    let theta = state.params.to_vec();
    let noise_scale = (2.0 * tau).sqrt();
    let proposal: Vec<f64> = theta
        .iter()
        .zip(&grad)
        .map(|(t, g)| t + tau * g)
        .collect::<Vec<_>>()
        .into_iter()
        .map(|m| m + noise_scale * std_normal(state))
        .collect();
    let p = ModelParams::from_slice(&proposal).expect("dimension preserved");
    let (lp, ll, correction) = if prior.in_support(&p) {
        let (lp, ll) = evaluate_proposal(state, data, prior, &p, Block::All);
        let mut grad_new = vec![0.0; dim];
        if ll.is_finite() {
            heated_gradient(&p, &state.scratch, state, data, prior, &mut grad_new);
        }
        if ll.is_finite() && grad_new.iter().all(|g| g.is_finite()) {
            let c = langevin_log_density(&theta, &proposal, &grad_new, tau)
                - langevin_log_density(&proposal, &theta, &grad, tau);
            (lp, ll, c)
        } else {
            (lp, f64::NEG_INFINITY, 0.0)
        }
    } else {
        (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0)
    };
    let ok = accept(state, lp, ll, correction);
    if ok {
        commit(state, p, lp, ll);
    }
    state.stats.record(Move::Mala, ok);
}

/// Heated probability of being susceptible for a censored subject,
/// `(S_P - p₀)^h / ((S_P - p₀)^h + p₀^h)`, from the log odds
/// `ln(S_P - p₀) - ln p₀`.
pub fn susceptible_weight(log_odds: f64, h: f64) -> f64 {
    if log_odds.is_nan() || log_odds == f64::INFINITY {
        // no cured mass: the subject must be susceptible
        return 1.0;
    }
    if log_odds == f64::NEG_INFINITY {
        return 0.0;
    }
    let x = h * log_odds;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Redraws every cure indicator from its heated full conditional. Subjects
/// with an observed event stay susceptible.
pub fn gibbs_latent(state: &mut ChainState, data: &Dataset) {
    let delta = data.delta();
    for i in 0..data.len() {
        if delta[i] {
            state.latent.ind[i] = true;
            continue;
        }
        let w = susceptible_weight(state.evals[i].log_odds(), state.heat);
        let u: f64 = state.rng.random();
        state.latent.ind[i] = u < w;
    }
    state.loglik = total_loglik(&state.evals, data, &state.latent);
}
