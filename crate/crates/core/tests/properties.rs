mod common;

use curemc_core::likelihood::grad_log_posterior;
use curemc_core::model::{susceptible_parts, ModelParams};
use curemc_core::posterior::{fdr_control, hdi, psrf, quantiles};
use curemc_core::prior::{Prior, PriorPreset};
use curemc_core::simgen::{generate_with_rate, invert_susceptible_time, scenarios};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Probabilities with frequent exact ties and endpoint values.
fn cure_probs() -> impl Strategy<Value = Vec<f64>> {
    let q = prop_oneof![
        3 => 0.0..=1.0f64,
        1 => (0u8..=10).prop_map(|v| v as f64 / 10.0),
    ];
    prop::collection::vec(q, 0..120)
}

proptest! {
    #[test]
    fn fdr_expected_rate_never_exceeds_alpha(q in cure_probs(), alpha in 0.001..0.5f64) {
        let d = fdr_control(&q, alpha).unwrap();
        let selected: Vec<f64> = q.iter().zip(&d.decisions).filter(|x| *x.1).map(|x| *x.0).collect();
        prop_assert_eq!(selected.len(), d.k_alpha);
        prop_assert_eq!(d.r, d.k_alpha);
        if d.r > 0 {
            prop_assert!(d.expected_fdr <= alpha);
            let mean = selected.iter().map(|v| 1.0 - v).sum::<f64>() / d.r as f64;
            prop_assert!((mean - d.expected_fdr).abs() < 1e-12);
            // The selected set is a top set of the probabilities.
            let min_sel = selected.iter().copied().fold(f64::INFINITY, f64::min);
            let max_rest = q.iter().zip(&d.decisions).filter(|x| !*x.1).map(|x| *x.0)
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min_sel >= max_rest);
        } else {
            prop_assert_eq!(d.expected_fdr, 0.0);
        }
    }

    #[test]
    fn fdr_count_grows_with_alpha(q in cure_probs(), a in 0.001..0.5f64, b in 0.001..0.5f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(fdr_control(&q, lo).unwrap().k_alpha <= fdr_control(&q, hi).unwrap().k_alpha);
    }

    #[test]
    fn fdr_decisions_ignore_input_order(q in cure_probs(), alpha in 0.001..0.5f64, seed: u64) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..q.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
        let a = fdr_control(&q, alpha).unwrap();
        let b = fdr_control(&shuffled, alpha).unwrap();
        prop_assert_eq!(a.k_alpha, b.k_alpha);
        prop_assert_eq!(a.expected_fdr, b.expected_fdr);
    }

    #[test]
    fn hdi_covers_at_least_the_level(
        seed: u64,
        n in 100usize..1500,
        sep in 0.0..12.0f64,
        level in 0.5..0.99f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr::StandardNormal;
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let z: f64 = rand::Rng::sample(&mut rng, normal);
                if i % 3 == 0 { z + sep } else { z }
            })
            .collect();
        let h = hdi(&xs, level).unwrap();
        let inside = xs.iter().filter(|x| h.contains(**x)).count() as f64 / n as f64;
        prop_assert!(inside >= level, "{inside} < {level}");
        prop_assert_eq!(h.coverage, inside);
        for w in h.intervals.windows(2) {
            prop_assert!(w[0].1 < w[1].0);
        }
        for (a, b) in &h.intervals {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn psrf_is_affine_and_order_invariant(
        seed: u64,
        len in 10usize..200,
        chains in 2usize..5,
        scale in 0.01..100.0f64,
        shift in -50.0..50.0f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<Vec<f64>> = (0..chains)
            .map(|c| (0..len).map(|_| rand::Rng::random::<f64>(&mut rng) + 0.1 * c as f64).collect())
            .collect();
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let r = psrf(&refs).unwrap();
        prop_assert!(r > 0.0 && r.is_finite());

        let moved: Vec<Vec<f64>> = data.iter().map(|c| c.iter().map(|v| scale * v + shift).collect()).collect();
        let mrefs: Vec<&[f64]> = moved.iter().map(Vec::as_slice).collect();
        prop_assert!((psrf(&mrefs).unwrap() - r).abs() < 1e-9 * r);

        let mut rev = refs.clone();
        rev.reverse();
        prop_assert!((psrf(&rev).unwrap() - r).abs() < 1e-12 * r);
    }

    #[test]
    fn quantiles_are_ordered_and_bounded(xs in prop::collection::vec(-1e6..1e6f64, 1..300)) {
        let probs = [0.0, 0.025, 0.25, 0.5, 0.75, 0.975, 1.0];
        let q = quantiles(&xs, &probs).unwrap();
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(q[0], min);
        prop_assert_eq!(q[6], max);
        prop_assert!(q.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn inversion_round_trips(
        idx in 0usize..14,
        u in 0.001..0.999f64,
        dgamma in -0.4..0.4f64,
        x1 in 0u32..6,
        x2 in 0.0..1.0f64,
    ) {
        let sc = &scenarios()[idx];
        let mut p = sc.params.clone();
        p.gamma += dgamma;
        let x = [f64::from(x1.min(sc.x1_levels)), x2];
        let t = invert_susceptible_time(u, &x, &p).unwrap();
        prop_assert!(t > 0.0 && t.is_finite());
        let (s_u, _) = susceptible_parts(t, &x, &p).unwrap();
        prop_assert!((s_u - u).abs() < 1e-10, "{s_u} vs {u}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn posterior_gradient_matches_finite_differences(
        idx in 0usize..14,
        seed: u64,
        hot in any::<bool>(),
    ) {
        let sc = &scenarios()[idx];
        let sim = generate_with_rate(sc, 60, 0.3, seed).unwrap();
        let prior = Prior::preset(PriorPreset::Regularized, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let h = if hot { 0.36 } else { 1.0 };
        let p: ModelParams = common::perturb(&mut rng, &sc.params);
        let latent = common::random_latent(&mut rng, &sim.data);
        let Ok(g) = grad_log_posterior(&p, &sim.data, &latent, &prior, h) else {
            return Ok(());
        };
        let fd = common::fd_gradient(&p, &sim.data, &latent, &prior, h);
        for j in 0..g.len() {
            prop_assert!(
                (g[j] - fd[j]).abs() <= 1e-5 * fd[j].abs().max(1.0),
                "coord {}: {} vs {}", j, g[j], fd[j]
            );
        }
    }
}
