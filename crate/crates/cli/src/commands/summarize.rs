use std::path::Path;

use curemc_core::model::ModelParams;
use curemc_core::posterior::{hdi, map_estimate, psrf, psrf_split, quantiles};
use curemc_core::trace::TraceStore;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::ingest::Standardization;
use crate::store::{load_fit, pooled, write_json};

pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
const LEVEL: f64 = 0.95;
const PROBS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub parameter: String,
    /// `model` for the fitted parameterisation, `original` for β mapped back
    /// to unstandardised covariates.
    pub scale: String,
    pub map: f64,
    pub mean: f64,
    pub sd: f64,
    /// At 2.5, 25, 50, 75 and 97.5%.
    pub quantiles: Vec<f64>,
    /// Empty when there are too few draws.
    pub hdi: Vec<(f64, f64)>,
    /// Across runs; absent with one run or too short traces.
    pub psrf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub retained_per_run: Vec<usize>,
    pub hdi_level: f64,
    pub psrf_variant: String,
    pub params: Vec<ParamSummary>,
}

/// Recomputes the summary of the fit in `dir` from its files and writes
/// `summary.csv` and `summary.json` there.
pub fn summarize(dir: &Path, split: bool) -> Result<Summary> {
    let (fit, traces) = load_fit(dir, false)?;
    let names = ModelParams::names(fit.k());
    let map = map_estimate(&pooled(&traces))?;
    let mut params = param_rows(&traces, &names, "model", &map, |p| p.to_vec(), split)?;
    if fit.standardization.iter().any(Option::is_some) {
        let tr = &fit.standardization;
        let beta_names = &names[4..];
        let orig = |p: &ModelParams| original_beta(&p.beta, tr);
        params.extend(param_rows(&traces, beta_names, "original", &map, orig, split)?);
    }
    let summary = Summary {
        runs: traces.len(),
        retained_per_run: traces.iter().map(|t| t.retained().len()).collect(),
        hdi_level: LEVEL,
        psrf_variant: if split { "split" } else { "classic" }.into(),
        params,
    };
    write_csv(&dir.join(SUMMARY_CSV), &summary)?;
    write_json(&dir.join(SUMMARY_JSON), &summary)?;
    Ok(summary)
}

/// β for the unstandardised covariates: `β_j / sd_j` for a transformed
/// column, with the centring moved into the intercept.
pub fn original_beta(beta: &[f64], transforms: &[Option<Standardization>]) -> Vec<f64> {
    let mut out = beta.to_vec();
    for (j, t) in transforms.iter().enumerate() {
        if let Some(t) = t {
            out[j + 1] = beta[j + 1] / t.sd;
            out[0] -= beta[j + 1] * t.mean / t.sd;
        }
    }
    out
}

fn param_rows(
    traces: &[TraceStore],
    names: &[String],
    scale: &str,
    map: &ModelParams,
    values: impl Fn(&ModelParams) -> Vec<f64>,
    split: bool,
) -> Result<Vec<ParamSummary>> {
    // columns[run][param][draw]
    let columns: Vec<Vec<Vec<f64>>> = traces
        .iter()
        .map(|t| {
            let mut cols = vec![Vec::with_capacity(t.retained().len()); names.len()];
            for d in t.retained() {
                for (c, v) in cols.iter_mut().zip(values(&d.params)) {
                    c.push(v);
                }
            }
            cols
        })
        .collect();
    let map_values = values(map);
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let per_run: Vec<&[f64]> = columns.iter().map(|c| c[j].as_slice()).collect();
            let all: Vec<f64> = per_run.concat();
            if all.is_empty() {
                return Err(CliError::Validation("no draws after burn-in".into()));
            }
            let n = all.len() as f64;
            let mean = all.iter().sum::<f64>() / n;
            let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let interval = hdi(&all, LEVEL).map(|h| h.intervals).unwrap_or_default();
            let r_hat = if per_run.len() < 2 {
                None
            } else if split {
                psrf_split(&per_run).ok()
            } else {
                psrf(&per_run).ok()
            };
            Ok(ParamSummary {
                parameter: name.clone(),
                scale: scale.into(),
                map: map_values[j],
                mean,
                sd: var.sqrt(),
                quantiles: quantiles(&all, &PROBS)?,
                hdi: interval,
                psrf: r_hat,
            })
        })
        .collect()
}

fn write_csv(path: &Path, summary: &Summary) -> Result<()> {
    let err = |e: csv::Error| CliError::Validation(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header = vec!["parameter", "scale", "map", "mean", "sd"];
    header.extend(["q2.5", "q25", "q50", "q75", "q97.5"]);
    header.extend(["hdi95_lower", "hdi95_upper", "hdi95_intervals", "psrf"]);
    w.write_record(&header).map_err(err)?;
    for p in &summary.params {
        let mut rec = vec![
            p.parameter.clone(),
            p.scale.clone(),
            p.map.to_string(),
            p.mean.to_string(),
            p.sd.to_string(),
        ];
        rec.extend(p.quantiles.iter().map(f64::to_string));
        let (lo, hi) = match (p.hdi.first(), p.hdi.last()) {
            (Some(a), Some(b)) => (a.0.to_string(), b.1.to_string()),
            _ => (String::new(), String::new()),
        };
        let pieces: Vec<String> = p.hdi.iter().map(|(a, b)| format!("{a}:{b}")).collect();
        rec.extend([lo, hi, pieces.join(";")]);
        rec.push(p.psrf.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path)(e))
}
