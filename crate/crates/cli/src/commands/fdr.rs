use std::path::{Path, PathBuf};

use curemc_core::posterior::{fdr_control, susceptible_prob};
use serde::{Deserialize, Serialize};

use super::simulate::Sidecar;
use crate::error::{CliError, Result};
use crate::store::{load_fit, pooled, read_json, write_json};

pub const DEFAULT_ALPHAS: [f64; 9] = [0.01, 0.025, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10, 0.15];
pub const FDR_JSON: &str = "fdr.json";
pub const FDR_CSV: &str = "fdr.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrRow {
    pub alpha: f64,
    pub k_alpha: usize,
    pub expected_fdr: f64,
    /// Declared cured among the truly susceptible, over declarations.
    pub achieved_fdr: Option<f64>,
    /// Declared cured among the truly cured, over truly cured.
    pub true_positive_rate: Option<f64>,
    /// Data rows (0-based) declared cured.
    pub cured: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrReport {
    pub truth: Option<PathBuf>,
    /// Censored data rows and their posterior cure probabilities.
    pub censored: Vec<usize>,
    pub cure_probs: Vec<f64>,
    pub rows: Vec<FdrRow>,
}

/// Applies the FDR rule at each `alpha` to the censored subjects of the fit
/// in `dir` and writes `fdr.json` and `fdr.csv` there. `truth` overrides the
/// simulation sidecar recorded at fit time.
pub fn fdr_report(dir: &Path, alphas: &[f64], truth: Option<&Path>) -> Result<FdrReport> {
    let (fit, traces) = load_fit(dir, true)?;
    let p_susceptible = susceptible_prob(&pooled(&traces))?;
    let cure_probs: Vec<f64> = fit.censored.iter().map(|&j| 1.0 - p_susceptible[j]).collect();

    let truth_path = truth.map(Path::to_path_buf).or(fit.truth_path.clone());
    let latent = match &truth_path {
        Some(p) => {
            let s: Sidecar = read_json(p)?;
            if s.latent.len() != fit.n {
                return Err(CliError::Validation(format!(
                    "{}: {} indicators for {} subjects",
                    p.display(),
                    s.latent.len(),
                    fit.n
                )));
            }
            Some(s.latent)
        }
        None => None,
    };

    let rows = alphas
        .iter()
        .map(|&alpha| {
            let d = fdr_control(&cure_probs, alpha)?;
            let cured: Vec<usize> = fit
                .censored
                .iter()
                .zip(&d.decisions)
                .filter(|(_, &c)| c)
                .map(|(&j, _)| j)
                .collect();
            let (achieved_fdr, true_positive_rate) = match &latent {
                Some(truth) => {
                    let false_disc = cured.iter().filter(|&&j| truth[j] == 1).count();
                    let total_cured = truth.iter().filter(|&&v| v == 0).count();
                    let fdr = if cured.is_empty() {
                        0.0
                    } else {
                        false_disc as f64 / cured.len() as f64
                    };
                    let tpr = (total_cured > 0)
                        .then(|| (cured.len() - false_disc) as f64 / total_cured as f64);
                    (Some(fdr), tpr)
                }
                None => (None, None),
            };
            Ok(FdrRow {
                alpha,
                k_alpha: d.k_alpha,
                expected_fdr: d.expected_fdr,
                achieved_fdr,
                true_positive_rate,
                cured,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = FdrReport {
        truth: truth_path,
        censored: fit.censored,
        cure_probs,
        rows,
    };
    write_json(&dir.join(FDR_JSON), &report)?;
    write_csv(&dir.join(FDR_CSV), &report)?;
    Ok(report)
}

fn write_csv(path: &Path, report: &FdrReport) -> Result<()> {
    let err = |e: csv::Error| CliError::Validation(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["alpha", "k_alpha", "expected_fdr", "achieved_fdr", "true_positive_rate"])
        .map_err(err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &report.rows {
        w.write_record([
            r.alpha.to_string(),
            r.k_alpha.to_string(),
            r.expected_fdr.to_string(),
            opt(r.achieved_fdr),
            opt(r.true_positive_rate),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path)(e))
}
