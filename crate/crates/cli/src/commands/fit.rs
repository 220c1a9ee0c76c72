use std::path::{Path, PathBuf};
use std::time::Instant;

use curemc_core::sampler::run_mc3;

use super::simulate::{sidecar_path, Sidecar};
use super::summarize::summarize;
use crate::config::FitConfig;
use crate::error::{CliError, Result};
use crate::ingest::ingest_csv;
use crate::store::{read_json, run_dir, write_json, write_run, FitManifest, RunManifest, MANIFEST};

/// Runs `runs` independent tempered samplers on the data and writes traces,
/// manifests and the multi-run summary under `out`.
pub fn fit(data_path: &Path, cfg: &FitConfig, runs: usize, out: &Path) -> Result<FitManifest> {
    cfg.validate()?;
    if runs == 0 {
        return Err(CliError::Validation("runs must be positive".into()));
    }
    let data_path = std::fs::canonicalize(data_path).map_err(CliError::io(data_path))?;
    let ing = ingest_csv(&data_path, cfg.standardize)?;
    let data = &ing.data;
    let prior = cfg.prior.build(ing.covariates.len())?;
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;

    let manifest = FitManifest {
        truth_path: find_truth(&data_path, data.len()),
        data_path,
        config: cfg.clone(),
        runs,
        n: data.len(),
        censored: data.censored(),
        max_time: data.y().iter().copied().fold(0.0, f64::max),
        covariates: ing.covariates.clone(),
        standardization: ing.transforms.clone(),
    };
    write_json(&out.join(MANIFEST), &manifest)?;

    for r in 0..runs {
        let start = Instant::now();
        let output = run_mc3(data, &prior, &cfg.mc3(r))?;
        let secs = start.elapsed().as_secs_f64();
        log::info!("run {r}: {} draws in {secs:.1}s", output.draws.len());
        let run = RunManifest::new(r, cfg, &output, secs);
        write_run(&run_dir(out, r), &run, &output.draws, data.len(), manifest.k())?;
    }
    summarize(out, false)?;
    Ok(manifest)
}

/// Repeats the fit recorded in `manifest` into `out`.
pub fn refit(manifest: &Path, out: &Path) -> Result<FitManifest> {
    let m: FitManifest = read_json(manifest)?;
    fit(&m.data_path, &m.config, m.runs, out)
}

fn find_truth(data_path: &Path, n: usize) -> Option<PathBuf> {
    let path = sidecar_path(data_path);
    let sidecar: Sidecar = read_json(&path).ok()?;
    (sidecar.latent.len() == n).then_some(path)
}
