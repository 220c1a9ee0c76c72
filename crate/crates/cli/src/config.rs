//! Fit configuration as read from JSON.

use std::path::Path;

use curemc_core::prior::{Prior, PriorHyperparams, PriorPreset};
use curemc_core::sampler::{Bands, Mc3Config};
use serde::{Deserialize, Serialize};

use crate::error::{json_error, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Preset(PriorPreset),
    Custom(PriorHyperparams),
}

impl PriorSpec {
    pub fn build(&self, k: usize) -> Result<Prior> {
        match self {
            PriorSpec::Preset(p) => Ok(Prior::preset(*p, k)),
            PriorSpec::Custom(hp) => Ok(Prior::new(hp.clone())?),
        }
    }
}

/// Every field has a default, so `{}` is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub prior: PriorSpec,
    pub chains: usize,
    pub cycles: u64,
    pub iters_per_cycle: u64,
    pub warmup: u64,
    /// Probability of a single-site sweep rather than a MALA step.
    pub p1: f64,
    pub epsilon: f64,
    pub d: f64,
    /// Leading fraction of cycles discarded in summaries.
    pub burn_in: f64,
    pub thin: u64,
    pub seed: u64,
    pub workers: Option<usize>,
    pub standardize: bool,
    pub bands: Bands,
}

impl Default for FitConfig {
    fn default() -> Self {
        let mc3 = Mc3Config::default();
        Self {
            prior: PriorSpec::Preset(PriorPreset::Vague),
            chains: 8,
            cycles: 5_000,
            iters_per_cycle: mc3.iters_per_cycle,
            warmup: mc3.warmup,
            p1: mc3.p1,
            epsilon: mc3.epsilon,
            d: mc3.d,
            burn_in: 0.3,
            thin: mc3.thin,
            seed: mc3.seed,
            workers: None,
            standardize: true,
            bands: mc3.bands,
        }
    }
}

impl FitConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let cfg: FitConfig = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.burn_in > 0.0 && self.burn_in < 1.0) {
            return Err(CliError::Validation(format!(
                "burn_in must lie in (0, 1), got {}",
                self.burn_in
            )));
        }
        if self.workers == Some(0) {
            return Err(CliError::Validation("workers must be positive".into()));
        }
        self.mc3(0).validate()?;
        Ok(())
    }

    /// Sampler settings for run `run`.
    pub fn mc3(&self, run: usize) -> Mc3Config {
        Mc3Config {
            chains: self.chains,
            cycles: self.cycles,
            iters_per_cycle: self.iters_per_cycle,
            warmup: self.warmup,
            p1: self.p1,
            epsilon: self.epsilon,
            d: self.d,
            thin: self.thin,
            seed: run_seed(self.seed, run),
            workers: self.workers,
            bands: self.bands.clone(),
        }
    }

    pub fn burn_in_cycles(&self) -> u64 {
        (self.burn_in * self.cycles as f64).floor() as u64
    }
}

/// Seed of run `run`; run 0 uses the configured seed itself. Chain seeds are
/// derived from this by xor with the chain index, so consecutive run seeds
/// would share chain streams.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed.wrapping_add((run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
