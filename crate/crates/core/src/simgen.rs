//! Synthetic right-censored cure-rate data.
//!
//! Covariates are `X₁ ~ U{0..K}` and `X₂ ~ U(0, 1)`. Each subject is cured
//! with probability `p₀(x)`; susceptible event times are drawn from `S_U` by
//! inversion and everybody receives an exponential censoring time whose rate
//! is calibrated to a target censoring proportion among susceptibles.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CureSurvival, Dataset, LatentState, ModelParams};

/// Bisection steps on `ln r` in [`calibrate_censoring`].
pub const CALIBRATION_STEPS: usize = 60;
/// Accepted distance between the calibrated and target censoring proportion.
pub const CALIBRATION_TOLERANCE: f64 = 0.005;
/// Default Monte Carlo size for calibration.
pub const DEFAULT_CALIBRATION_DRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub params: ModelParams,
    /// `X₁` is uniform on `{0, …, x1_levels}`.
    pub x1_levels: u32,
    /// Censoring proportion among susceptibles.
    pub target_censoring: f64,
    /// Reported population cure rate, for validation only.
    pub nominal_cure_rate: f64,
}

#[allow(clippy::too_many_arguments)]
fn scenario(
    name: &str,
    gamma: f64,
    lambda: f64,
    alpha1: f64,
    alpha2: f64,
    beta: [f64; 3],
    cure: f64,
    censoring: f64,
) -> Scenario {
    Scenario {
        name: name.to_string(),
        params: ModelParams::new(gamma, lambda, alpha1, alpha2, beta.to_vec()),
        x1_levels: if name.starts_with('A') || name.starts_with('B') {
            1
        } else {
            5
        },
        target_censoring: censoring,
        nominal_cure_rate: cure,
    }
}

/// The fourteen simulation settings A1–F4.
pub fn scenarios() -> Vec<Scenario> {
    vec![
        scenario("A1", 1.0, 1.5, 0.8, 0.8, [1.5, 1.5, -0.8], 0.05, 0.10),
        scenario("A2", 1.0, 1.5, 0.8, 0.8, [1.5, 1.5, -0.8], 0.05, 0.20),
        scenario("B1", 1.0, 1.0, 0.5, 0.5, [-0.8, 1.5, 1.5], 0.25, 0.10),
        scenario("B2", 1.0, 1.0, 0.5, 0.5, [-0.8, 1.5, 1.5], 0.25, 0.20),
        scenario("C1", 1.0, 1.0, 1.0, 1.0, [-4.0, 1.0, 1.0], 0.60, 0.10),
        scenario("C2", 1.0, 1.0, 1.0, 1.0, [-4.0, 1.0, 1.0], 0.60, 0.20),
        scenario("D1", -0.05, 1.0, 0.8, 1.0, [2.0, -1.0, 1.0], 0.40, 0.10),
        scenario("D2", -0.05, 1.0, 0.8, 1.0, [2.0, -1.0, 1.0], 0.40, 0.20),
        scenario("E1", -0.5, 1.0, 0.8, 1.0, [2.0, -0.7, 1.0], 0.25, 0.10),
        scenario("E2", -0.5, 1.0, 0.8, 1.0, [2.0, -0.7, 1.0], 0.25, 0.20),
        scenario("F1", -1.0, 0.5, 0.5, 0.5, [1.0, 0.0, 0.0], 0.0, 0.10),
        scenario("F2", -1.0, 0.5, 0.5, 0.5, [1.0, 0.0, 0.0], 0.0, 0.20),
        scenario("F3", -1.0, 1.0, 0.5, 0.5, [1.0, 0.0, 0.0], 0.0, 0.30),
        scenario("F4", -1.0, 1.0, 0.5, 0.5, [1.0, 0.0, 0.0], 0.0, 0.40),
    ]
}

pub fn scenario_by_name(name: &str) -> Result<Scenario> {
    scenarios()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Config(format!("unknown scenario `{name}`")))
}

/// Solves `S_U(t) = u` for a susceptible subject.
pub fn invert_susceptible_time(u: f64, x_row: &[f64], params: &ModelParams) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("u = {u} outside (0, 1)")));
    }
    let cs = CureSurvival::for_subject(params, x_row)?;
    let log_p0 = cs.log_cure_prob();
    let p0 = log_p0.exp();
    let one_minus_p0 = -log_p0.exp_m1();
    if !(one_minus_p0 > 0.0) {
        return Err(Error::Degenerate(p0));
    }
    // target population survival s = p₀ + (1-p₀)u
    let ln_s = (p0 + one_minus_p0 * u).ln();
    // (1 + γ u_ϑ q)^{-1/γ} = s  ⇒  q = (-ln s / u_ϑ) · (e^x - 1)/x,  x = -γ ln s
    let x = -params.gamma * ln_s;
    let expm1_ratio = if x.abs() < 1e-12 { 1.0 + 0.5 * x } else { x.exp_m1() / x };
    let ln_q = (-ln_s).ln() - cs.ln_u + expm1_ratio.ln();
    let ln_f = ln_q / params.lambda;
    if !(ln_f < 0.0) {
        return Err(Error::Domain(format!(
            "inverted promotion-time cdf outside (0, 1) (ln F = {ln_f})"
        )));
    }
    let w = -(-ln_f.exp_m1()).ln();
    let t = w.powf(1.0 / params.alpha2) / params.alpha1;
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(Error::Domain(format!("inverted time {t} is not positive and finite")))
    }
}

fn draw_covariates<R: Rng>(rng: &mut R, x1_levels: u32) -> [f64; 2] {
    let x1 = rng.random_range(0..=x1_levels) as f64;
    let x2: f64 = rng.random();
    [x1, x2]
}

/// A susceptible event time, redrawing `u` in the (practically unreachable)
/// case that rounding pushes the inversion outside its domain.
fn draw_event_time<R: Rng>(rng: &mut R, x: &[f64], params: &ModelParams) -> Result<f64> {
    for _ in 0..100 {
        let u: f64 = rng.sample(Open01);
        match invert_susceptible_time(u, x, params) {
            Ok(t) => return Ok(t),
            Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Domain("could not draw a susceptible event time".into()))
}

/// Rate `r` of the exponential censoring distribution giving censoring
/// proportion `target` among susceptibles.
///
/// Uses common random numbers: `mc_n` susceptible subjects with event times
/// `T` and unit exponentials `E` are drawn once, and `ln r` is bisected on the
/// proportion of `E/r < T`, which is non-decreasing in `r`.
pub fn calibrate_censoring(scenario: &Scenario, target: f64, mc_n: usize, seed: u64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!("target censoring {target} outside (0, 1)")));
    }
    if mc_n == 0 {
        return Err(Error::Config("calibration needs at least one draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let params = &scenario.params;
    let mut pairs = Vec::with_capacity(mc_n);
    while pairs.len() < mc_n {
        let x = draw_covariates(&mut rng, scenario.x1_levels);
        let p0 = crate::model::cure_prob(&x, params)?;
        let u: f64 = rng.random();
        if u < p0 {
            continue;
        }
        let t = draw_event_time(&mut rng, &x, params)?;
        let e: f64 = Exp1.sample(&mut rng);
        pairs.push((t, e));
    }
    let proportion = |ln_r: f64| {
        let r = ln_r.exp();
        pairs.iter().filter(|(t, e)| e / r < *t).count() as f64 / mc_n as f64
    };
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    if proportion(lo) > target || proportion(hi) < target {
        return Err(Error::Calibration(format!(
            "target {target} not bracketed by rates e^-30..e^30"
        )));
    }
    for _ in 0..CALIBRATION_STEPS {
        let mid = 0.5 * (lo + hi);
        if proportion(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ln_r = 0.5 * (lo + hi);
    let achieved = proportion(ln_r);
    if (achieved - target).abs() > CALIBRATION_TOLERANCE {
        return Err(Error::Calibration(format!(
            "achieved proportion {achieved} for target {target} (rate {})",
            ln_r.exp()
        )));
    }
    Ok(ln_r.exp())
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub data: Dataset,
    /// True cure indicators; for evaluation only.
    pub latent: LatentState,
    pub censoring_rate: f64,
}

/// Generates `n` subjects with a given censoring rate.
pub fn generate_with_rate(
    scenario: &Scenario,
    n: usize,
    censoring_rate: f64,
    seed: u64,
) -> Result<Simulated> {
    if n == 0 {
        return Err(Error::Config("sample size must be positive".into()));
    }
    if !(censoring_rate > 0.0 && censoring_rate.is_finite()) {
        return Err(Error::Domain(format!("censoring rate {censoring_rate}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = &scenario.params;
    let (mut y, mut delta, mut rows, mut ind) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for _ in 0..n {
        let x = draw_covariates(&mut rng, scenario.x1_levels);
        let p0 = crate::model::cure_prob(&x, params)?;
        let susceptible = rng.random::<f64>() >= p0;
        let e: f64 = Exp1.sample(&mut rng);
        let c = e / censoring_rate;
        if susceptible {
            let t: f64 = draw_event_time(&mut rng, &x, params)?;
            y.push(t.min(c));
            delta.push(t <= c);
        } else {
            y.push(c);
            delta.push(false);
        }
        ind.push(susceptible);
        rows.push(x.to_vec());
    }
    Ok(Simulated {
        data: Dataset::new(y, delta, rows, 2)?,
        latent: LatentState { ind },
        censoring_rate,
    })
}

/// Calibrates the censoring rate for the scenario's target and generates
/// `n` subjects. Both steps are determined by `seed`.
pub fn generate(scenario: &Scenario, n: usize, seed: u64) -> Result<Simulated> {
    let rate = calibrate_censoring(
        scenario,
        scenario.target_censoring,
        DEFAULT_CALIBRATION_DRAWS,
        seed,
    )?;
    generate_with_rate(scenario, n, rate, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::susceptible_parts;

    #[test]
    fn fourteen_scenarios_with_covariate_levels() {
        let all = scenarios();
        assert_eq!(all.len(), 14);
        assert_eq!(scenario_by_name("b2").unwrap().x1_levels, 1);
        assert_eq!(scenario_by_name("C1").unwrap().x1_levels, 5);
        assert!(scenario_by_name("G1").is_err());
    }

    #[test]
    fn inversion_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let sc = &scenarios()[rng.random_range(0..14)];
            let mut params = sc.params.clone();
            params.gamma += rng.random_range(-0.3..0.3);
            let x = draw_covariates(&mut rng, sc.x1_levels);
            let u: f64 = rng.random_range(0.001..0.999);
            let t = invert_susceptible_time(u, &x, &params).unwrap();
            let (s_u, _) = susceptible_parts(t, &x, &params).unwrap();
            assert!((s_u - u).abs() < 1e-10, "{params:?} u={u}: {s_u}");
        }
    }

    #[test]
    fn inversion_near_one_gives_small_times() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0, vec![0.0]);
        let t = invert_susceptible_time(1.0 - 1e-12, &[], &p).unwrap();
        assert!(t < 1e-10);
    }

    #[test]
    fn inversion_matches_bisection() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0, vec![0.0]);
        let t = invert_susceptible_time(0.5, &[], &p).unwrap();
        let (mut lo, mut hi) = (1e-9, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if susceptible_parts(mid, &[], &p).unwrap().0 > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((t - lo).abs() < 1e-10);
    }

    #[test]
    fn zero_cure_scenario_has_no_cured() {
        let sc = scenario_by_name("F1").unwrap();
        let sim = generate_with_rate(&sc, 2000, 0.1, 3).unwrap();
        assert!(sim.latent.ind.iter().all(|&i| i));
    }

    #[test]
    fn events_are_susceptible_and_seed_is_reproducible() {
        let sc = scenario_by_name("B1").unwrap();
        let a = generate_with_rate(&sc, 500, 0.05, 9).unwrap();
        assert!(a.latent.is_consistent_with(&a.data));
        assert_eq!(a, generate_with_rate(&sc, 500, 0.05, 9).unwrap());
    }

    #[test]
    fn calibration_is_monotone_and_deterministic() {
        let sc = scenario_by_name("A1").unwrap();
        let r10 = calibrate_censoring(&sc, 0.10, 20_000, 5).unwrap();
        let r20 = calibrate_censoring(&sc, 0.20, 20_000, 5).unwrap();
        let r01 = calibrate_censoring(&sc, 0.01, 20_000, 5).unwrap();
        assert!(r01 < r10 && r10 < r20);
        assert_eq!(r10, calibrate_censoring(&sc, 0.10, 20_000, 5).unwrap());
    }
}
