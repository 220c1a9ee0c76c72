//! MALA-within-Gibbs sampling of the heated posterior and its
//! Metropolis-coupled (parallel tempering) extension.

mod adapt;
mod kernels;
mod tempering;

pub use adapt::{adapt_scales, AdaptReport, Bands};
use adapt::{tune_round, tuning_rounds, warn_unconverged};
pub use kernels::{gibbs_latent, mala_step, mh_single_site_sweep, susceptible_weight};
pub use tempering::{
    run_mc3, swap_log_prob, temperature_ladder, Mc3Config, Mc3Output, SwapStats,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{
    complete_loglik_with_grad, evaluate_into, observed_from, total_loglik, Block, SubjectEval,
};
use crate::model::{Dataset, LatentState, ModelParams};
use crate::prior::{sample_initial, Prior};
use crate::trace::{Draw, PackedBits};

/// Attempts at drawing a starting point with finite log posterior.
pub const MAX_INIT_ATTEMPTS: usize = 100;

/// Proposal variances of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalScales {
    pub s2_gamma: f64,
    /// Variances on the log scale for the positive parameters.
    pub s2_lambda: f64,
    pub s2_alpha1: f64,
    pub s2_alpha2: f64,
    pub nu: Vec<f64>,
    pub tau: f64,
}

impl ProposalScales {
    /// Starting values before warm-up tuning.
    pub fn initial(k: usize) -> Self {
        Self {
            s2_gamma: 0.05,
            s2_lambda: 0.05,
            s2_alpha1: 0.05,
            s2_alpha2: 0.05,
            nu: vec![0.02; k + 1],
            tau: 1e-3,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.s2_gamma, self.s2_lambda, self.s2_alpha1, self.s2_alpha2, self.tau]
            .iter()
            .chain(&self.nu)
            .all(|v| *v >= 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config("proposal scales must be non-negative".into()))
        }
    }
}

/// Move types with their own acceptance counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Gamma = 0,
    Lambda = 1,
    Alpha1 = 2,
    Alpha2 = 3,
    Beta = 4,
    Mala = 5,
}

impl Move {
    pub const ALL: [Move; 6] = [
        Move::Gamma,
        Move::Lambda,
        Move::Alpha1,
        Move::Alpha2,
        Move::Beta,
        Move::Mala,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Move::Gamma => "gamma",
            Move::Lambda => "lambda",
            Move::Alpha1 => "alpha1",
            Move::Alpha2 => "alpha2",
            Move::Beta => "beta",
            Move::Mala => "mala",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub proposed: [u64; 6],
    pub accepted: [u64; 6],
    /// MALA iterations replaced by a single-site sweep because the gradient
    /// was not finite.
    pub mala_fallbacks: u64,
}

impl AcceptanceStats {
    pub(crate) fn record(&mut self, mv: Move, accepted: bool) {
        self.proposed[mv as usize] += 1;
        if accepted {
            self.accepted[mv as usize] += 1;
        }
    }

    /// Acceptance rate, `None` when nothing was proposed.
    pub fn rate(&self, mv: Move) -> Option<f64> {
        let p = self.proposed[mv as usize];
        (p > 0).then(|| self.accepted[mv as usize] as f64 / p as f64)
    }
}

/// State of one chain: `(θ, I)` plus its heat, scales and private generator.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub params: ModelParams,
    pub latent: LatentState,
    pub heat: f64,
    pub scales: ProposalScales,
    pub rng: ChaCha8Rng,
    /// Unheated complete log-likelihood at `(params, latent)`.
    pub loglik: f64,
    /// Unheated log prior at `params`.
    pub logprior: f64,
    pub stats: AcceptanceStats,
    /// Per-subject evaluation at `params`, and a buffer for proposals.
    pub(crate) evals: Vec<SubjectEval>,
    pub(crate) scratch: Vec<SubjectEval>,
}

/// Seed of the private generator of chain `index`.
pub fn chain_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

impl ChainState {
    /// Chain at an explicit point.
    pub fn new(
        params: ModelParams,
        latent: LatentState,
        heat: f64,
        scales: ProposalScales,
        rng: ChaCha8Rng,
        data: &Dataset,
        prior: &Prior,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&heat) {
            return Err(Error::Config(format!("heat {heat} outside [0, 1]")));
        }
        if params.beta.len() != data.n_covariates() + 1 || scales.nu.len() != params.beta.len() {
            return Err(Error::Dimension {
                expected: data.n_covariates() + 1,
                got: params.beta.len(),
            });
        }
        if !latent.is_consistent_with(data) {
            return Err(Error::Domain("latent state inconsistent with data".into()));
        }
        scales.validate()?;
        let mut state = Self {
            params,
            latent,
            heat,
            scales,
            rng,
            loglik: 0.0,
            logprior: 0.0,
            stats: AcceptanceStats::default(),
            evals: Vec::new(),
            scratch: Vec::new(),
        };
        state.refresh(data, prior);
        Ok(state)
    }

    /// Chain started from a random prior-style draw with every subject
    /// susceptible, retrying until the log posterior is finite.
    pub fn initialise(
        data: &Dataset,
        prior: &Prior,
        heat: f64,
        scales: ProposalScales,
        seed: u64,
        index: usize,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(seed, index));
        let latent = LatentState::all_susceptible(data.len());
        for _ in 0..MAX_INIT_ATTEMPTS {
            let params = sample_initial(&mut rng, data.n_covariates());
            let lp = prior.log_density(&params);
            let ll = complete_loglik_with_grad(&params, data, &latent, None);
            if lp.is_finite() && ll.is_finite() {
                return Self::new(params, latent, heat, scales, rng, data, prior);
            }
        }
        Err(Error::Initialisation(MAX_INIT_ATTEMPTS))
    }

    pub(crate) fn refresh(&mut self, data: &Dataset, prior: &Prior) {
        self.logprior = prior.log_density(&self.params);
        evaluate_into(&self.params, data, None, Block::All, &mut self.evals);
        self.loglik = if self.params.is_valid() {
            total_loglik(&self.evals, data, &self.latent)
        } else {
            f64::NEG_INFINITY
        };
    }

    /// Unheated joint log posterior `ln L_c + ln π`.
    pub fn log_posterior(&self) -> f64 {
        self.loglik + self.logprior
    }

    /// Heated log target `h (ln L_c + ln π)`.
    pub fn log_target(&self) -> f64 {
        self.heat * self.log_posterior()
    }

    pub(crate) fn draw(&self, cycle: u64, data: &Dataset) -> Draw {
        Draw {
            cycle,
            log_post: self.log_posterior(),
            log_lik: observed_from(&self.evals, data),
            params: self.params.clone(),
            latent: PackedBits::from_bools(&self.latent.ind),
        }
    }
}

/// One iteration: a single-site sweep with probability `p1`, a MALA step
/// otherwise, then a Gibbs update of the latent indicators.
pub fn iterate(state: &mut ChainState, data: &Dataset, prior: &Prior, p1: f64) {
    if state.rng.random::<f64>() < p1 {
        mh_single_site_sweep(state, data, prior);
    } else {
        mala_step(state, data, prior);
    }
    gibbs_latent(state, data);
}

/// Runs `m` iterations, storing the state after every `record_every`-th one.
pub fn run_chain(
    state: &mut ChainState,
    data: &Dataset,
    prior: &Prior,
    m: u64,
    p1: f64,
    record_every: u64,
) -> Vec<Draw> {
    let record_every = record_every.max(1);
    let mut draws = Vec::with_capacity((m / record_every) as usize);
    for t in 1..=m {
        iterate(state, data, prior, p1);
        if t % record_every == 0 {
            draws.push(state.draw(t, data));
        }
    }
    draws
}
