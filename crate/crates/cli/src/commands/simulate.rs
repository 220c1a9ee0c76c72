use std::path::{Path, PathBuf};

use curemc_core::model::ModelParams;
use curemc_core::simgen::{generate, generate_with_rate, scenario_by_name};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::store::write_json;

/// Written next to a simulated dataset. The true indicators are for
/// evaluating FDR decisions only; fitting never reads them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub scenario: String,
    pub seed: u64,
    pub n: usize,
    pub params: ModelParams,
    pub censoring_rate: f64,
    pub target_censoring: f64,
    pub nominal_cure_rate: f64,
    /// `1` = susceptible, `0` = cured, in data row order.
    pub latent: Vec<u8>,
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

/// Writes `out` (CSV) and its sidecar; a given `rate` skips calibration.
pub fn simulate(
    scenario: &str,
    n: usize,
    seed: u64,
    rate: Option<f64>,
    out: &Path,
) -> Result<Sidecar> {
    let sc = scenario_by_name(scenario).map_err(|e| CliError::Validation(e.to_string()))?;
    let sim = match rate {
        Some(r) => generate_with_rate(&sc, n, r, seed)?,
        None => generate(&sc, n, seed)?,
    };
    let mut w = csv::Writer::from_path(out)
        .map_err(|e| CliError::Validation(format!("{}: {e}", out.display())))?;
    let k = sim.data.n_covariates();
    let mut header = vec!["y".to_string(), "delta".to_string()];
    header.extend((1..=k).map(|j| format!("x{j}")));
    let rows = (0..n).map(|i| {
        let mut rec = vec![
            sim.data.y()[i].to_string(),
            u8::from(sim.data.delta()[i]).to_string(),
        ];
        rec.extend(sim.data.row(i).iter().map(|v| v.to_string()));
        rec
    });
    std::iter::once(header)
        .chain(rows)
        .try_for_each(|rec| w.write_record(&rec))
        .and_then(|_| w.flush().map_err(csv::Error::from))
        .map_err(|e| CliError::Validation(format!("{}: {e}", out.display())))?;

    let sidecar = Sidecar {
        scenario: sc.name.clone(),
        seed,
        n,
        params: sc.params.clone(),
        censoring_rate: sim.censoring_rate,
        target_censoring: sc.target_censoring,
        nominal_cure_rate: sc.nominal_cure_rate,
        latent: sim.latent.ind.iter().map(|&b| u8::from(b)).collect(),
    };
    write_json(&sidecar_path(out), &sidecar)?;
    Ok(sidecar)
}
