//! Helpers shared by the integration targets.
#![allow(dead_code)]

use curemc_core::likelihood::log_posterior;
use curemc_core::model::{Dataset, LatentState, ModelParams};
use curemc_core::prior::Prior;
use rand::Rng;

/// Central-difference gradient of `h · ln π(θ, I | data)` by Ridders'
/// extrapolation, which halves the step until the extrapolated estimates stop
/// improving. Near the edge of the feasible region the log posterior bends on
/// a scale of 1e-5, so a fixed 1e-4 step is off by up to a factor of two and
/// larger starting steps let the extrapolation settle on a wrong value.
pub fn fd_gradient(
    params: &ModelParams,
    data: &Dataset,
    latent: &LatentState,
    prior: &Prior,
    h: f64,
) -> Vec<f64> {
    let base = params.to_vec();
    (0..base.len())
        .map(|j| {
            let f = |d: f64| {
                let mut v = base.clone();
                v[j] += d;
                let p = ModelParams::from_slice(&v).unwrap();
                h * log_posterior(&p, data, latent, prior).unwrap()
            };
            ridders(f, 1e-5 * base[j].abs().max(1.0))
        })
        .collect()
}

/// Derivative at 0 of `f`, starting from step `h0` and halving it.
pub fn ridders(f: impl Fn(f64) -> f64, h0: f64) -> f64 {
    const LEVELS: usize = 20;
    let central = |s: f64| (f(s) - f(-s)) / (2.0 * s);
    let mut step = h0;
    while !central(step).is_finite() && step > h0 * 1e-6 {
        step /= 2.0;
    }
    let mut table = vec![vec![0.0; LEVELS]; LEVELS];
    table[0][0] = central(step);
    let (mut best, mut err) = (table[0][0], f64::INFINITY);
    for i in 1..LEVELS {
        step /= 2.0;
        table[0][i] = central(step);
        let mut fac = 4.0;
        for k in 1..=i {
            table[k][i] = (table[k - 1][i] * fac - table[k - 1][i - 1]) / (fac - 1.0);
            fac *= 4.0;
            let e = (table[k][i] - table[k - 1][i])
                .abs()
                .max((table[k][i] - table[k - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[k][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    best
}

/// A point near `centre` with `|γ| ≥ 0.05`, so finite-difference steps never
/// straddle the prior's singularity at zero.
pub fn perturb<R: Rng>(rng: &mut R, centre: &ModelParams) -> ModelParams {
    let gamma = loop {
        let g = centre.gamma + rng.random_range(-0.5..0.5);
        if g.abs() >= 0.05 {
            break g;
        }
    };
    let mut scale = || (rng.random_range(-0.3..0.3f64)).exp();
    let (l, a1, a2) = (
        centre.lambda * scale(),
        centre.alpha1 * scale(),
        centre.alpha2 * scale(),
    );
    let beta = centre
        .beta
        .iter()
        .map(|b| b + rng.random_range(-0.5..0.5))
        .collect();
    ModelParams::new(gamma, l, a1, a2, beta)
}

/// Events susceptible, censored subjects susceptible with probability 1/2.
pub fn random_latent<R: Rng>(rng: &mut R, data: &Dataset) -> LatentState {
    LatentState {
        ind: data.delta().iter().map(|&d| d || rng.random_bool(0.5)).collect(),
    }
}

/// Asymptotic Kolmogorov p-value of a one-sample KS statistic.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Largest distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Standard error of the mean by non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let len = xs.len() / batches;
    let means: Vec<f64> = xs
        .chunks_exact(len)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}
