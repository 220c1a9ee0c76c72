//! On-disk layout of a fit:
//!
//! ```text
//! out/manifest.json          data, config and covariate transforms
//! out/run_<r>/trace.csv      cycle, log_post, log_lik, parameters
//! out/run_<r>/latent.bin     packed indicator draws, one per trace row
//! out/run_<r>/manifest.json  seed, tuned scales, acceptance, timing
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use curemc_core::model::ModelParams;
use curemc_core::sampler::{AdaptReport, Mc3Output, Move, ProposalScales, SwapStats};
use curemc_core::trace::{Draw, PackedBits, TraceStore};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::FitConfig;
use crate::error::{json_error, CliError, Result};
use crate::ingest::Standardization;

pub const MANIFEST: &str = "manifest.json";
pub const TRACE: &str = "trace.csv";
pub const LATENT: &str = "latent.bin";
const LATENT_MAGIC: &[u8; 8] = b"CURELAT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub data_path: PathBuf,
    /// Simulation sidecar holding the true indicators, when one was found.
    pub truth_path: Option<PathBuf>,
    pub config: FitConfig,
    pub runs: usize,
    pub n: usize,
    /// Data rows (0-based) with `delta = 0`.
    pub censored: Vec<usize>,
    pub max_time: f64,
    pub covariates: Vec<String>,
    pub standardization: Vec<Option<Standardization>>,
}

impl FitManifest {
    pub fn k(&self) -> usize {
        self.covariates.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run: usize,
    pub seed: u64,
    pub config: FitConfig,
    pub burn_in_cycles: u64,
    pub stored_draws: usize,
    pub heats: Vec<f64>,
    pub scales: Vec<ProposalScales>,
    pub adapt: Vec<AdaptReport>,
    /// Post-warm-up acceptance rate of each move, per chain (cold first).
    pub acceptance: Vec<BTreeMap<String, f64>>,
    pub swaps: SwapStats,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn new(
        run: usize,
        config: &FitConfig,
        out: &Mc3Output,
        wall_time_secs: f64,
    ) -> Self {
        let acceptance = out
            .acceptance
            .iter()
            .map(|a| {
                Move::ALL
                    .iter()
                    .filter_map(|&m| a.rate(m).map(|r| (m.name().to_string(), r)))
                    .collect()
            })
            .collect();
        Self {
            run,
            seed: config.mc3(run).seed,
            config: config.clone(),
            burn_in_cycles: config.burn_in_cycles(),
            stored_draws: out.draws.len(),
            heats: out.heats.clone(),
            scales: out.scales.clone(),
            adapt: out.adapt.clone(),
            acceptance,
            swaps: out.swaps.clone(),
            wall_time_secs,
        }
    }
}

pub fn run_dir(out: &Path, run: usize) -> PathBuf {
    out.join(format!("run_{run}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").map_err(CliError::io(path))?;
    w.flush().map_err(CliError::io(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| json_error(path, e))
}

/// Header of the trace file for `k` covariates: `k + 8` columns.
pub fn trace_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["cycle", "log_post", "log_lik"].map(String::from).into();
    h.extend(ModelParams::names(k));
    h
}

pub fn write_trace(path: &Path, draws: &[Draw], k: usize) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "{}", trace_header(k).join(","))?;
        for d in draws {
            write!(w, "{},{},{}", d.cycle, d.log_post, d.log_lik)?;
            for v in d.params.to_vec() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write().map_err(CliError::io(path))
}

/// Rows of a trace file as `(cycle, log_post, log_lik, params)`.
pub fn read_trace(path: &Path, k: usize) -> Result<Vec<(u64, f64, f64, ModelParams)>> {
    let bad = |m: String| CliError::Validation(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if header != trace_header(k) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| bad(format!("line {line}: {e}")))?;
        let cycle: u64 = rec[0]
            .parse()
            .map_err(|_| bad(format!("line {line}: bad cycle `{}`", &rec[0])))?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| bad(format!("line {line}: {e}")))?;
        let params = ModelParams::from_slice(&vals[2..])?;
        rows.push((cycle, vals[0], vals[1], params));
    }
    Ok(rows)
}

/// Magic, `n` and draw count as little-endian `u64`, then one packed bit
/// vector of `ceil(n / 8)` bytes per draw.
pub fn write_latent(path: &Path, n: usize, draws: &[Draw]) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        w.write_all(LATENT_MAGIC)?;
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&(draws.len() as u64).to_le_bytes())?;
        for d in draws {
            w.write_all(d.latent.as_bytes())?;
        }
        w.flush()
    };
    write().map_err(CliError::io(path))
}

pub fn read_latent(path: &Path) -> Result<Vec<PackedBits>> {
    let bad = |m: &str| CliError::Validation(format!("{}: {m}", path.display()));
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut r = BufReader::new(file);
    let mut head = [0u8; 24];
    r.read_exact(&mut head)
        .map_err(|_| bad("truncated latent header"))?;
    if &head[..8] != LATENT_MAGIC {
        return Err(bad("not a latent indicator file"));
    }
    let word = |i: usize| u64::from_le_bytes(head[i..i + 8].try_into().unwrap()) as usize;
    let (n, count) = (word(8), word(16));
    let width = n.div_ceil(8);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut bytes = vec![0u8; width];
        r.read_exact(&mut bytes)
            .map_err(|_| bad("truncated latent draws"))?;
        out.push(PackedBits::from_bytes(n, bytes)?);
    }
    if r.read(&mut [0u8])
        .map_err(CliError::io(path))?
        > 0
    {
        return Err(bad("trailing bytes after latent draws"));
    }
    Ok(out)
}

pub fn write_run(dir: &Path, manifest: &RunManifest, draws: &[Draw], n: usize, k: usize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    write_trace(&dir.join(TRACE), draws, k)?;
    write_latent(&dir.join(LATENT), n, draws)?;
    write_json(&dir.join(MANIFEST), manifest)
}

/// One run's trace, with latent draws when `latent` is set.
pub fn load_run(dir: &Path, fit: &FitManifest, latent: bool) -> Result<TraceStore> {
    let run: RunManifest = read_json(&dir.join(MANIFEST))?;
    let rows = read_trace(&dir.join(TRACE), fit.k())?;
    let bits = if latent {
        let path = dir.join(LATENT);
        if !path.exists() {
            return Err(CliError::Validation(format!(
                "{}: latent draws missing",
                path.display()
            )));
        }
        let bits = read_latent(&path)?;
        if bits.len() != rows.len() {
            return Err(CliError::Validation(format!(
                "{}: {} latent draws for {} trace rows",
                path.display(),
                bits.len(),
                rows.len()
            )));
        }
        if bits.first().is_some_and(|b| b.len() != fit.n) {
            return Err(CliError::Validation(format!(
                "{}: indicator length differs from the data size {}",
                path.display(),
                fit.n
            )));
        }
        bits
    } else {
        vec![PackedBits::from_bools(&[]); rows.len()]
    };
    let draws = rows
        .into_iter()
        .zip(bits)
        .map(|((cycle, log_post, log_lik, params), latent)| Draw {
            cycle,
            log_post,
            log_lik,
            params,
            latent,
        })
        .collect();
    Ok(TraceStore::new(
        draws,
        run.burn_in_cycles,
        run.config.cycles,
        run.config.thin,
    ))
}

/// The fit manifest and every run's trace.
pub fn load_fit(dir: &Path, latent: bool) -> Result<(FitManifest, Vec<TraceStore>)> {
    let fit: FitManifest = read_json(&dir.join(MANIFEST))?;
    let traces = (0..fit.runs)
        .map(|r| load_run(&run_dir(dir, r), &fit, latent))
        .collect::<Result<Vec<_>>>()?;
    Ok((fit, traces))
}

/// Retained draws of all runs as one trace without burn-in.
pub fn pooled(traces: &[TraceStore]) -> TraceStore {
    let draws: Vec<Draw> = traces.iter().flat_map(|t| t.retained().iter().cloned()).collect();
    let total = traces.iter().map(|t| t.total_cycles).max().unwrap_or(0);
    let thin = traces.first().map_or(1, |t| t.thin);
    TraceStore::new(draws, 0, total, thin)
}
