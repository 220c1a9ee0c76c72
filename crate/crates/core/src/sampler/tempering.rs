//! Metropolis-coupled chains over a ladder of heats.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    iterate, tune_round, tuning_rounds, warn_unconverged, AcceptanceStats, AdaptReport, Bands,
    ChainState, ProposalScales,
};
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::prior::Prior;
use crate::trace::Draw;

/// Heats `h_c = (1+ε)^{-(c^d - 1)}` for `c = 1..=chains`.
pub fn temperature_ladder(chains: usize, epsilon: f64, d: f64) -> Result<Vec<f64>> {
    if chains == 0 {
        return Err(Error::Config("need at least one chain".into()));
    }
    if !(epsilon > 0.0 && d > 0.0 && epsilon.is_finite() && d.is_finite()) {
        return Err(Error::Config(format!(
            "ladder needs positive epsilon and d (got {epsilon}, {d})"
        )));
    }
    let ln_base = epsilon.ln_1p();
    Ok((1..=chains)
        .map(|c| (-((c as f64).powf(d) - 1.0) * ln_base).exp())
        .collect())
}

/// Log acceptance probability of exchanging the states of two chains,
/// `min{0, (h_i - h_j)(ln π(ξ_j) - ln π(ξ_i))}` with `π` the unheated joint
/// posterior.
pub fn swap_log_prob(a: &ChainState, b: &ChainState) -> f64 {
    let dh = a.heat - b.heat;
    if dh == 0.0 {
        return 0.0;
    }
    let v = dh * (b.log_posterior() - a.log_posterior());
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v.min(0.0)
    }
}

/// Attempts and acceptances per adjacent pair `(c, c+1)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SwapStats {
    pub attempts: Vec<u64>,
    pub accepts: Vec<u64>,
}

impl SwapStats {
    fn new(chains: usize) -> Self {
        let pairs = chains.saturating_sub(1);
        Self {
            attempts: vec![0; pairs],
            accepts: vec![0; pairs],
        }
    }
}

/// Exchanges `(θ, I)` between two slots; heats, scales, generators and
/// counters stay where they are.
fn exchange(chains: &mut [ChainState], c: usize) {
    let (lo, hi) = chains.split_at_mut(c + 1);
    let (a, b) = (&mut lo[c], &mut hi[0]);
    std::mem::swap(&mut a.params, &mut b.params);
    std::mem::swap(&mut a.latent, &mut b.latent);
    std::mem::swap(&mut a.loglik, &mut b.loglik);
    std::mem::swap(&mut a.logprior, &mut b.logprior);
    std::mem::swap(&mut a.evals, &mut b.evals);
}

/// Proposes one swap between a uniformly chosen adjacent pair.
fn swap_step(chains: &mut [ChainState], rng: &mut ChaCha8Rng, stats: &mut SwapStats) {
    if chains.len() < 2 {
        return;
    }
    let c = rng.random_range(0..chains.len() - 1);
    let log_a = swap_log_prob(&chains[c], &chains[c + 1]);
    let u: f64 = rng.random();
    stats.attempts[c] += 1;
    if u.ln() < log_a {
        stats.accepts[c] += 1;
        exchange(chains, c);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mc3Config {
    pub chains: usize,
    pub cycles: u64,
    pub iters_per_cycle: u64,
    pub warmup: u64,
    pub p1: f64,
    pub epsilon: f64,
    pub d: f64,
    /// Store the cold state every `thin` cycles.
    pub thin: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub bands: Bands,
}

impl Default for Mc3Config {
    fn default() -> Self {
        Self {
            chains: 16,
            cycles: 20_000,
            iters_per_cycle: 10,
            warmup: 10_000,
            p1: 0.5,
            epsilon: 0.001,
            d: 2.5,
            thin: 10,
            seed: 1,
            workers: None,
            bands: Bands::default(),
        }
    }
}

impl Mc3Config {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.cycles == 0 || self.iters_per_cycle == 0 || self.thin == 0 {
            return Err(Error::Config(
                "chains, cycles, iterations per cycle and thinning must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p1) {
            return Err(Error::Config(format!("p1 = {} outside [0, 1]", self.p1)));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("worker count must be positive".into()));
        }
        temperature_ladder(self.chains, self.epsilon, self.d).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mc3Output {
    /// Cold-chain states, one per `thin` cycles.
    pub draws: Vec<Draw>,
    pub heats: Vec<f64>,
    /// Tuned scales per slot.
    pub scales: Vec<ProposalScales>,
    pub adapt: Vec<AdaptReport>,
    /// Main-run acceptance counters per slot.
    pub acceptance: Vec<AcceptanceStats>,
    pub swaps: SwapStats,
}

/// Builds the ensemble, tunes each chain during warm-up, then alternates
/// `iters_per_cycle` iterations of every chain with one swap proposal.
pub fn run_mc3(data: &Dataset, prior: &Prior, cfg: &Mc3Config) -> Result<Mc3Output> {
    cfg.validate()?;
    let heats = temperature_ladder(cfg.chains, cfg.epsilon, cfg.d)?;
    let mut chains = heats
        .iter()
        .enumerate()
        .map(|(c, &h)| {
            ChainState::initialise(
                data,
                prior,
                h,
                ProposalScales::initial(data.n_covariates()),
                cfg.seed,
                c,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let run = |chains: &mut Vec<ChainState>| run_ensemble(chains, data, prior, cfg);
    let (draws, adapt, swaps) = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run(&mut chains)),
        None => run(&mut chains),
    };
    Ok(Mc3Output {
        draws,
        heats,
        scales: chains.iter().map(|c| c.scales.clone()).collect(),
        adapt,
        acceptance: chains.iter().map(|c| c.stats.clone()).collect(),
        swaps,
    })
}

/// Advances every chain `iters` iterations, in parallel.
fn advance(chains: &mut [ChainState], data: &Dataset, prior: &Prior, cfg: &Mc3Config) {
    chains.par_iter_mut().for_each(|c| {
        for _ in 0..cfg.iters_per_cycle {
            iterate(c, data, prior, cfg.p1);
        }
    });
}

/// Warm-up: tempered cycles with swap proposals, each chain retuning its
/// own scales every `bands.batch` iterations. Swapping during warm-up lets
/// a state that started in a minor mode drift to a hotter slot instead of
/// pinning the cold slot's scales to that mode's geometry.
fn warm_up(
    chains: &mut [ChainState],
    data: &Dataset,
    prior: &Prior,
    cfg: &Mc3Config,
    swap_rng: &mut ChaCha8Rng,
) -> Vec<AdaptReport> {
    let mut reports = vec![
        AdaptReport {
            rounds: 0,
            converged: true,
            last_round: AcceptanceStats::default(),
        };
        chains.len()
    ];
    let cycles_per_round = cfg.bands.batch.max(1).div_ceil(cfg.iters_per_cycle);
    let mut unused = SwapStats::new(chains.len());
    for c in chains.iter_mut() {
        c.stats = AcceptanceStats::default();
    }
    for _ in 0..tuning_rounds(cfg.warmup, &cfg.bands) {
        for _ in 0..cycles_per_round {
            advance(chains, data, prior, cfg);
            swap_step(chains, swap_rng, &mut unused);
        }
        for (c, r) in chains.iter_mut().zip(&mut reports) {
            tune_round(c, &cfg.bands, r);
        }
    }
    for (c, r) in chains.iter().zip(&reports) {
        warn_unconverged(c, r);
    }
    reports
}

fn run_ensemble(
    chains: &mut [ChainState],
    data: &Dataset,
    prior: &Prior,
    cfg: &Mc3Config,
) -> (Vec<Draw>, Vec<AdaptReport>, SwapStats) {
    let mut swap_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    swap_rng.set_stream(u64::MAX);
    let adapt = warm_up(chains, data, prior, cfg, &mut swap_rng);
    let mut swaps = SwapStats::new(chains.len());
    let mut draws = Vec::with_capacity((cfg.cycles / cfg.thin) as usize);
    for cycle in 1..=cfg.cycles {
        advance(chains, data, prior, cfg);
        swap_step(chains, &mut swap_rng, &mut swaps);
        if cycle % cfg.thin == 0 {
            draws.push(chains[0].draw(cycle, data));
        }
    }
    (draws, adapt, swaps)
}
