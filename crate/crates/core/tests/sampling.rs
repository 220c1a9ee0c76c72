mod common;

use curemc_core::model::Dataset;
use curemc_core::posterior::susceptible_prob;
use curemc_core::prior::{Prior, PriorPreset};
use curemc_core::sampler::{
    adapt_scales, run_chain, run_mc3, Bands, ChainState, Mc3Config, ProposalScales,
};
use curemc_core::simgen::{generate_with_rate, scenario_by_name};
use curemc_core::trace::TraceStore;

fn small_config(workers: Option<usize>) -> Mc3Config {
    Mc3Config {
        chains: 4,
        cycles: 60,
        iters_per_cycle: 3,
        warmup: 400,
        thin: 2,
        seed: 31,
        workers,
        ..Default::default()
    }
}

fn b1_data(n: usize) -> Dataset {
    let sc = scenario_by_name("B1").unwrap();
    generate_with_rate(&sc, n, 0.2, 8).unwrap().data
}

#[test]
fn mc3_output_is_independent_of_worker_count() {
    let data = b1_data(80);
    let prior = Prior::preset(PriorPreset::Regularized, 2);
    let one = run_mc3(&data, &prior, &small_config(Some(1))).unwrap();
    for w in [Some(2), Some(3), None] {
        let other = run_mc3(&data, &prior, &small_config(w)).unwrap();
        assert_eq!(one.draws, other.draws, "workers {w:?}");
        assert_eq!(one.swaps, other.swaps);
        assert_eq!(one.scales, other.scales);
    }
    assert_eq!(one.draws.len(), 30);
    assert_eq!(one.draws[0].cycle, 2);
}

#[test]
fn events_stay_susceptible_in_every_draw() {
    let data = b1_data(60);
    let prior = Prior::preset(PriorPreset::Regularized, 2);
    let out = run_mc3(&data, &prior, &small_config(None)).unwrap();
    let trace = TraceStore::new(out.draws, 0, 60, 2);
    let probs = susceptible_prob(&trace).unwrap();
    for (i, &d) in data.delta().iter().enumerate() {
        assert!((0.0..=1.0).contains(&probs[i]));
        if d {
            assert_eq!(probs[i], 1.0);
        }
    }
    assert!(data.delta().iter().zip(&probs).any(|(d, p)| !d && *p < 1.0));
}

#[test]
fn mc3_heats_follow_the_ladder() {
    let data = b1_data(40);
    let prior = Prior::preset(PriorPreset::Regularized, 2);
    let cfg = small_config(None);
    let out = run_mc3(&data, &prior, &cfg).unwrap();
    assert_eq!(out.heats[0], 1.0);
    assert!(out.heats.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(out.swaps.attempts.iter().sum::<u64>(), cfg.cycles);
    assert_eq!(out.acceptance.len(), cfg.chains);
}

#[test]
fn single_chain_tuning_lands_in_band_on_prior() {
    let data = Dataset::empty(1);
    let prior = Prior::preset(PriorPreset::Regularized, 1);
    let mut state =
        ChainState::initialise(&data, &prior, 1.0, ProposalScales::initial(1), 4, 0).unwrap();
    let bands = Bands::default();
    let report = adapt_scales(&mut state, &data, &prior, 0.5, 4000, &bands);
    assert_eq!(report.rounds, 20);
    let draws = run_chain(&mut state, &data, &prior, 2000, 0.5, 10);
    assert_eq!(draws.len(), 200);
    assert!(draws.iter().all(|d| d.log_post.is_finite()));
}

#[test]
fn invalid_configuration_is_rejected() {
    let data = b1_data(20);
    let prior = Prior::preset(PriorPreset::Regularized, 2);
    for cfg in [
        Mc3Config { chains: 0, ..small_config(None) },
        Mc3Config { thin: 0, ..small_config(None) },
        Mc3Config { p1: 1.5, ..small_config(None) },
        Mc3Config { epsilon: -1.0, ..small_config(None) },
    ] {
        assert!(run_mc3(&data, &prior, &cfg).is_err());
    }
    let wrong_k = Prior::preset(PriorPreset::Regularized, 3);
    assert!(run_mc3(&data, &wrong_k, &small_config(None)).is_err());
}
