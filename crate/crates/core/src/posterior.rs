//! Summaries of cold-chain traces: MAP, HDIs, PSRF, susceptible
//! probabilities, FDR-controlled cure calls and conditional cure curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CureSurvival, ModelParams, WeibullTerms};
use crate::trace::TraceStore;

/// Grid size of the kernel density behind [`hdi`].
pub const HDI_GRID: usize = 512;
/// Fewest samples accepted by [`hdi`].
pub const HDI_MIN_SAMPLES: usize = 100;
/// Shortest chains accepted by [`psrf`].
pub const PSRF_MIN_LENGTH: usize = 10;

/// Retained draw with the highest stored joint log posterior. Ties go to
/// the earliest draw.
pub fn map_estimate(trace: &TraceStore) -> Result<ModelParams> {
    let draws = trace.retained();
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in draws.iter().enumerate() {
        if d.log_post.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, v)| d.log_post > v) {
            best = Some((i, d.log_post));
        }
    }
    match best {
        Some((i, _)) => Ok(draws[i].params.clone()),
        None => Err(Error::EmptyTrace),
    }
}

/// A highest-density region as a union of disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hdi {
    pub level: f64,
    /// Sorted, disjoint.
    pub intervals: Vec<(f64, f64)>,
    /// Fraction of the samples inside the region.
    pub coverage: f64,
    /// Every sample had the same value.
    pub degenerate: bool,
}

impl Hdi {
    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }

    /// Smallest single interval containing the region.
    pub fn hull(&self) -> (f64, f64) {
        (
            self.intervals.first().map_or(f64::NAN, |i| i.0),
            self.intervals.last().map_or(f64::NAN, |i| i.1),
        )
    }
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("samples must be finite".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Linear-interpolation quantile of sorted data (type 7).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Empirical quantiles at each probability in `probs`.
pub fn quantiles(samples: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    let sorted = sorted_finite(samples)?;
    Ok(probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect())
}

/// Gaussian kernel density on an even grid, by linear binning followed by
/// a direct convolution with the kernel truncated at 5 bandwidths.
fn grid_density(sorted: &[f64], bw: f64, lo: f64, step: f64) -> Vec<f64> {
    let mut bins = vec![0.0; HDI_GRID];
    for &x in sorted {
        let pos = ((x - lo) / step).clamp(0.0, (HDI_GRID - 1) as f64);
        let i = (pos.floor() as usize).min(HDI_GRID - 2);
        let frac = pos - i as f64;
        bins[i] += 1.0 - frac;
        bins[i + 1] += frac;
    }
    let reach = ((5.0 * bw / step).ceil() as usize).min(HDI_GRID - 1);
    let kernel: Vec<f64> = (0..=reach)
        .map(|k| {
            let z = k as f64 * step / bw;
            (-0.5 * z * z).exp()
        })
        .collect();
    let norm = 1.0 / (sorted.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    (0..HDI_GRID)
        .map(|g| {
            let a = g.saturating_sub(reach);
            let b = (g + reach).min(HDI_GRID - 1);
            (a..=b).map(|j| bins[j] * kernel[g.abs_diff(j)]).sum::<f64>() * norm
        })
        .collect()
}

/// Runs of grid points with density ≥ `t`, with ends placed where the
/// linear interpolant of the density crosses `t`.
fn super_level_intervals(dens: &[f64], t: f64, lo: f64, step: f64) -> Vec<(f64, f64)> {
    let x = |i: usize| lo + i as f64 * step;
    let crossing = |i: usize, j: usize| {
        let (di, dj) = (dens[i], dens[j]);
        let f = if di == dj { 0.5 } else { (t - di) / (dj - di) };
        x(i) + f.clamp(0.0, 1.0) * (x(j) - x(i))
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < dens.len() {
        if dens[i] < t {
            i += 1;
            continue;
        }
        let start = if i == 0 { x(0) } else { crossing(i - 1, i) };
        let mut j = i;
        while j + 1 < dens.len() && dens[j + 1] >= t {
            j += 1;
        }
        let end = if j + 1 == dens.len() { x(j) } else { crossing(j + 1, j) };
        out.push((start, end));
        i = j + 1;
    }
    out
}

fn fraction_inside(sorted: &[f64], intervals: &[(f64, f64)]) -> f64 {
    let inside: usize = intervals
        .iter()
        .map(|&(a, b)| sorted.partition_point(|&v| v <= b) - sorted.partition_point(|&v| v < a))
        .sum();
    inside as f64 / sorted.len() as f64
}

/// Highest-density region holding `level` of the posterior mass.
///
/// A Gaussian kernel density (Silverman bandwidth) is evaluated on a
/// 512-point grid spanning the samples plus three bandwidths on each side.
/// The density threshold is bisected so that the super-level set carries
/// `level` of the grid mass; if the region then holds fewer than `level` of
/// the samples themselves, the threshold is lowered until it does. The
/// result may consist of several disjoint intervals.
pub fn hdi(samples: &[f64], level: f64) -> Result<Hdi> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level {level} outside (0, 1)")));
    }
    if samples.len() < HDI_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: HDI_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let sorted = sorted_finite(samples)?;
    let (first, last) = (sorted[0], sorted[sorted.len() - 1]);
    if first == last {
        log::warn!("HDI of {} identical samples", sorted.len());
        return Ok(Hdi {
            level,
            intervals: vec![(first, first)],
            coverage: 1.0,
            degenerate: true,
        });
    }
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = 0.9 * spread * n.powf(-0.2);
    let lo = first - 3.0 * bw;
    let step = (last + 3.0 * bw - lo) / (HDI_GRID - 1) as f64;
    let dens = grid_density(&sorted, bw, lo, step);
    let total: f64 = dens.iter().sum();
    let mass_above = |t: f64| dens.iter().filter(|&&d| d >= t).sum::<f64>() / total;
    let peak = dens.iter().cloned().fold(0.0, f64::max);

    // largest threshold whose super-level set still has the target grid mass
    let (mut a, mut b) = (0.0, peak);
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if mass_above(mid) >= level {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mut t = a;
    let mut intervals = super_level_intervals(&dens, t, lo, step);
    let mut coverage = fraction_inside(&sorted, &intervals);
    if coverage < level {
        let (mut a, mut b) = (0.0, t);
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if fraction_inside(&sorted, &super_level_intervals(&dens, mid, lo, step)) >= level {
                a = mid;
            } else {
                b = mid;
            }
        }
        t = a;
        intervals = super_level_intervals(&dens, t, lo, step);
        coverage = fraction_inside(&sorted, &intervals);
    }
    Ok(Hdi {
        level,
        intervals,
        coverage,
        degenerate: false,
    })
}

/// Gelman–Rubin potential scale reduction factor of one scalar over
/// several chains of equal length: `sqrt(((n-1)/n·W + B/n) / W)`.
pub fn psrf(chains: &[&[f64]]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: chains.len(),
        });
    }
    let n = chains[0].len();
    if let Some(c) = chains.iter().find(|c| c.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: c.len(),
        });
    }
    if n < PSRF_MIN_LENGTH {
        return Err(Error::TooFewSamples {
            needed: PSRF_MIN_LENGTH,
            got: n,
        });
    }
    let nf = n as f64;
    let m = chains.len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    if !(w > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((((nf - 1.0) / nf * w + b / nf) / w).sqrt())
}

/// [`psrf`] after splitting every chain into its two halves (dropping the
/// middle draw of odd-length chains).
pub fn psrf_split(chains: &[&[f64]]) -> Result<f64> {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[c.len() - h..]]
        })
        .collect();
    psrf(&halves)
}

/// Posterior probability `P(I_j = 1 | data)` for every subject, as the mean
/// of the stored indicators over retained draws.
pub fn susceptible_prob(trace: &TraceStore) -> Result<Vec<f64>> {
    let draws = trace.retained();
    let Some(first) = draws.first() else {
        return Err(Error::EmptyTrace);
    };
    let n = first.latent.len();
    let mut counts = vec![0u64; n];
    for d in draws {
        if d.latent.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: d.latent.len(),
            });
        }
        for (j, c) in counts.iter_mut().enumerate() {
            *c += d.latent.get(j) as u64;
        }
    }
    let total = draws.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Outcome of the FDR rule over censored subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrDecision {
    pub alpha: f64,
    pub k_alpha: usize,
    /// `true` = declared cured, in input order.
    pub decisions: Vec<bool>,
    /// Number of subjects declared cured.
    pub r: usize,
    /// Mean of `1 - q` over the declared subjects, `0` when none are.
    pub expected_fdr: f64,
}

/// Declares cured the `k_α` subjects with the largest cure probabilities,
/// where `k_α = max{j : Σ_{i≤j} (1 - q_(i)) / j ≤ α}` over the probabilities
/// sorted in decreasing order (`0` if no `j` qualifies). Ties are broken by
/// input position.
pub fn fdr_control(cure_probs: &[f64], alpha: f64) -> Result<FdrDecision> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 1)")));
    }
    if let Some(q) = cure_probs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::Domain(format!("cure probability {q} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..cure_probs.len()).collect();
    order.sort_by(|&a, &b| cure_probs[b].total_cmp(&cure_probs[a]));
    let mut k_alpha = 0;
    let mut running = 0.0;
    let mut fdr_at_k = 0.0;
    for (j, &i) in order.iter().enumerate() {
        running += 1.0 - cure_probs[i];
        let g = running / (j + 1) as f64;
        if g <= alpha {
            k_alpha = j + 1;
            fdr_at_k = g;
        }
    }
    let mut decisions = vec![false; cure_probs.len()];
    for &i in &order[..k_alpha] {
        decisions[i] = true;
    }
    Ok(FdrDecision {
        alpha,
        k_alpha,
        decisions,
        r: k_alpha,
        expected_fdr: fdr_at_k,
    })
}

/// Posterior mean and pointwise HDI band of `P(cured | T ≥ t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CureCurve {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    /// Hull of the pointwise HDI.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub level: f64,
    /// Draws skipped because the model could not be evaluated at them.
    pub skipped: usize,
}

/// `p₀(x; θ) / S_P(t | x, θ)` per draw, averaged over draws and summarised
/// by an HDI band at each `t`. `t = 0` gives `p₀`.
pub fn cure_curve(
    draws: &[ModelParams],
    x_row: &[f64],
    t_grid: &[f64],
    level: f64,
) -> Result<CureCurve> {
    if let Some(t) = t_grid.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::Domain(format!("time {t} must be finite and non-negative")));
    }
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(draws.len()); t_grid.len()];
    let mut skipped = 0;
    'draws: for p in draws {
        if !p.is_valid() {
            skipped += 1;
            continue;
        }
        let Ok(cs) = CureSurvival::for_subject(p, x_row) else {
            skipped += 1;
            continue;
        };
        let log_p0 = cs.log_cure_prob();
        let mut row = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            let v = if t == 0.0 {
                log_p0.exp()
            } else {
                let wt = WeibullTerms::new(t, p.alpha1, p.alpha2);
                (log_p0 - cs.log_survival(wt.ln_cdf)).exp()
            };
            if !v.is_finite() {
                skipped += 1;
                continue 'draws;
            }
            row.push(v.min(1.0));
        }
        for (col, v) in values.iter_mut().zip(row) {
            col.push(v);
        }
    }
    let mut mean = Vec::with_capacity(t_grid.len());
    let mut lo = Vec::with_capacity(t_grid.len());
    let mut hi = Vec::with_capacity(t_grid.len());
    for col in &values {
        if col.is_empty() {
            return Err(Error::EmptyTrace);
        }
        mean.push(col.iter().sum::<f64>() / col.len() as f64);
        let (a, b) = hdi(col, level)?.hull();
        lo.push(a);
        hi.push(b);
    }
    if skipped > 0 {
        log::warn!("cure curve skipped {skipped} infeasible draws");
    }
    Ok(CureCurve {
        t: t_grid.to_vec(),
        mean,
        lo,
        hi,
        level,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Draw, PackedBits};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn draw(cycle: u64, log_post: f64, gamma: f64, bits: &[bool]) -> Draw {
        Draw {
            cycle,
            log_post,
            log_lik: 0.0,
            params: ModelParams::new(gamma, 1.0, 1.0, 1.0, vec![0.0]),
            latent: PackedBits::from_bools(bits),
        }
    }

    #[test]
    fn map_picks_highest_and_ignores_burn_in() {
        let lp = [5.0, 1.0, 3.0, 9.0, 2.0, 9.0, -1.0];
        let draws: Vec<Draw> = lp
            .iter()
            .enumerate()
            .map(|(i, &v)| draw(i as u64 + 1, v, i as f64, &[]))
            .collect();
        let t = TraceStore::new(draws.clone(), 0, 7, 1);
        assert_eq!(map_estimate(&t).unwrap().gamma, 3.0);
        let shifted: Vec<Draw> = draws
            .iter()
            .map(|d| Draw {
                log_post: d.log_post - 40.0,
                ..d.clone()
            })
            .collect();
        assert_eq!(map_estimate(&TraceStore::new(shifted, 0, 7, 1)).unwrap().gamma, 3.0);
        // burn-in covers the first four cycles
        assert_eq!(map_estimate(&TraceStore::new(draws, 4, 7, 1)).unwrap().gamma, 5.0);
        assert_eq!(
            map_estimate(&TraceStore::new(vec![], 0, 1, 1)),
            Err(Error::EmptyTrace)
        );
    }

    #[test]
    fn hdi_of_constant_samples() {
        let h = hdi(&[2.5; 150], 0.9).unwrap();
        assert!(h.degenerate);
        assert_eq!(h.intervals, vec![(2.5, 2.5)]);
        assert!(matches!(hdi(&[1.0; 99], 0.9), Err(Error::TooFewSamples { .. })));
    }

    fn normal_samples(n: usize, mu: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mu, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn hdi_of_standard_normal() {
        let s = normal_samples(100_000, 0.0, 3);
        let h = hdi(&s, 0.95).unwrap();
        assert_eq!(h.intervals.len(), 1);
        let (a, b) = h.intervals[0];
        // ±z_{0.975}
        assert!((a + 1.959_964).abs() < 0.05, "{a}");
        assert!((b - 1.959_964).abs() < 0.05, "{b}");
        assert!(h.coverage >= 0.95);
    }

    #[test]
    fn hdi_splits_separated_modes() {
        let mut s = normal_samples(5_000, -5.0, 4);
        s.extend(normal_samples(5_000, 5.0, 5));
        let h = hdi(&s, 0.95).unwrap();
        assert_eq!(h.intervals.len(), 2);
        assert!(h.intervals[0].1 < 0.0 && h.intervals[1].0 > 0.0);
        assert!(h.contains(-5.0) && h.contains(5.0) && !h.contains(0.0));
    }

    #[test]
    fn psrf_of_identical_chains() {
        let c: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = psrf(&[&c, &c]).unwrap();
        assert!((r - (49.0f64 / 50.0).sqrt()).abs() < 1e-12);
        assert_eq!(psrf(&[&[1.0; 20], &[1.0; 20]]), Err(Error::ZeroVariance));
        assert!(psrf(&[&c[..5], &c[..5]]).is_err());
        assert!(psrf(&[&c, &c[..49]]).is_err());
    }

    #[test]
    fn psrf_flags_disjoint_chains() {
        let a = normal_samples(1000, 0.0, 1);
        let b = normal_samples(1000, 100.0, 2);
        assert!(psrf(&[&a, &b]).unwrap() > 10.0);
        assert!(psrf_split(&[&a, &b]).unwrap() > 10.0);
        let c = normal_samples(1000, 0.0, 6);
        assert!(psrf(&[&a, &c]).unwrap() < 1.01);
    }

    #[test]
    fn susceptible_probabilities_average_bits() {
        let draws = (1..=4)
            .map(|c| draw(c, 0.0, 1.0, &[true, c % 2 == 0, false]))
            .collect();
        let p = susceptible_prob(&TraceStore::new(draws, 0, 4, 1)).unwrap();
        assert_eq!(p, vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn fdr_worked_example() {
        let d = fdr_control(&[0.9, 0.8, 0.2], 0.15).unwrap();
        assert_eq!(d.k_alpha, 2);
        assert_eq!(d.decisions, vec![true, true, false]);
        assert!((d.expected_fdr - 0.15).abs() < 1e-15);
        let none = fdr_control(&[0.0; 4], 0.5).unwrap();
        assert_eq!((none.k_alpha, none.r, none.expected_fdr), (0, 0, 0.0));
        assert!(fdr_control(&[1.2], 0.1).is_err());
        assert!(fdr_control(&[0.5], 1.0).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let q = quantiles(&[4.0, 1.0, 3.0, 2.0, 5.0], &[0.0, 0.25, 0.5, 0.9, 1.0]).unwrap();
        assert_eq!(q, vec![1.0, 2.0, 3.0, 4.6, 5.0]);
    }

    #[test]
    fn cure_curve_edges() {
        let draws: Vec<ModelParams> = (0..200)
            .map(|i| ModelParams::new(0.5 + i as f64 * 1e-3, 1.2, 0.9, 1.1, vec![0.1, 0.4]))
            .collect();
        let grid = [0.0, 0.5, 1.0, 3.0];
        let c = cure_curve(&draws, &[0.3], &grid, 0.95).unwrap();
        let p0_mean = draws
            .iter()
            .map(|p| crate::model::cure_prob(&[0.3], p).unwrap())
            .sum::<f64>()
            / 200.0;
        assert!((c.mean[0] - p0_mean).abs() < 1e-14);
        assert!(c.mean.windows(2).all(|w| w[0] <= w[1]));
        let zero: Vec<ModelParams> = (0..100)
            .map(|_| ModelParams::new(-1.0, 1.0, 1.0, 1.0, vec![1.0, 0.0]))
            .collect();
        let z = cure_curve(&zero, &[0.7], &grid, 0.9).unwrap();
        assert!(z.mean.iter().all(|&v| v == 0.0));
    }
}
