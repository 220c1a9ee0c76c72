//! Warm-up tuning of proposal scales toward target acceptance bands.

use serde::{Deserialize, Serialize};

use super::{iterate, AcceptanceStats, ChainState, Move};
use crate::model::Dataset;
use crate::prior::Prior;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    /// Acceptance band of each single-site block.
    pub mh: (f64, f64),
    /// Acceptance band of the Langevin move.
    pub mala: (f64, f64),
    /// Iterations per tuning round.
    pub batch: u64,
    pub max_rounds: usize,
    /// Factor applied to a variance whose acceptance is too low.
    pub shrink: f64,
    /// Factor applied to a variance whose acceptance is too high.
    pub grow: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Self {
            mh: (0.15, 0.30),
            mala: (0.40, 0.60),
            batch: 200,
            max_rounds: 50,
            shrink: 0.6,
            grow: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptReport {
    pub rounds: usize,
    pub converged: bool,
    /// Acceptance counts of the last round.
    pub last_round: AcceptanceStats,
}

fn scale_mut(state: &mut ChainState, mv: Move) -> Vec<&mut f64> {
    let s = &mut state.scales;
    match mv {
        Move::Gamma => vec![&mut s.s2_gamma],
        Move::Lambda => vec![&mut s.s2_lambda],
        Move::Alpha1 => vec![&mut s.s2_alpha1],
        Move::Alpha2 => vec![&mut s.s2_alpha2],
        Move::Beta => s.nu.iter_mut().collect(),
        Move::Mala => vec![&mut s.tau],
    }
}

/// Number of tuning rounds for a warm-up of `m0` iterations.
pub(crate) fn tuning_rounds(m0: u64, bands: &Bands) -> usize {
    (m0.div_ceil(bands.batch.max(1)) as usize).min(bands.max_rounds)
}

/// Rescales every move whose acceptance rate since the last reset falls
/// outside its band, then resets the counters. Moves that were never
/// proposed are left alone. Returns whether every move was in band.
pub(crate) fn tune_round(state: &mut ChainState, bands: &Bands, report: &mut AdaptReport) {
    let stats = std::mem::take(&mut state.stats);
    let mut all_in = true;
    for mv in Move::ALL {
        let Some(rate) = stats.rate(mv) else { continue };
        let (lo, hi) = if mv == Move::Mala { bands.mala } else { bands.mh };
        let factor = if rate < lo {
            bands.shrink
        } else if rate > hi {
            bands.grow
        } else {
            continue;
        };
        all_in = false;
        for v in scale_mut(state, mv) {
            *v *= factor;
        }
    }
    report.rounds += 1;
    report.converged = all_in;
    report.last_round = stats;
}

pub(crate) fn warn_unconverged(state: &ChainState, report: &AdaptReport) {
    if !report.converged {
        log::warn!(
            "proposal tuning at heat {} ended after {} rounds with a move outside its band",
            state.heat,
            report.rounds
        );
    }
}

/// Runs `min(⌈m0 / batch⌉, max_rounds)` batches of `bands.batch` iterations,
/// rescaling after each one every move whose batch acceptance rate falls
/// outside its band. Tuning continues through the whole warm-up, since rates
/// measured while the chain is still travelling from its starting point do
/// not hold once it settles; `converged` reports whether the final round had
/// every move in band. The acceptance counters are reset afterwards.
pub fn adapt_scales(
    state: &mut ChainState,
    data: &Dataset,
    prior: &Prior,
    p1: f64,
    m0: u64,
    bands: &Bands,
) -> AdaptReport {
    let mut report = AdaptReport {
        rounds: 0,
        converged: true,
        last_round: AcceptanceStats::default(),
    };
    state.stats = AcceptanceStats::default();
    for _ in 0..tuning_rounds(m0, bands) {
        for _ in 0..bands.batch.max(1) {
            iterate(state, data, prior, p1);
        }
        tune_round(state, bands, &mut report);
    }
    warn_unconverged(state, &report);
    report
}
